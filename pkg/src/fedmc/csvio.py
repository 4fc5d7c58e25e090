"""Machine-readable outputs with fixed column schemas.

The plotting layer consumes these files and nothing else, so the schemas are
pinned here:

    round_log.csv  round, train_loss, test_loss, train_acc, test_acc,
                   mean_client_dist, mean_dist_to_global
    noise.csv      round, iter, neuron, norm_total, norm_drift, norm_bias
    path.csv       nu, dataset, loss, acc
    barrier.csv    round_or_pair, B, absolute_barrier, argmax_a
    landscape.csv  a, b, dataset, loss, accuracy
    distances.csv  label, <one column per checkpoint label>
    dropout.csv    run, stage_round, width, keep_frac, trial, dataset, eps_d,
                   full_loss, subnet_loss
    noise_stats.csv run, mean, max, min
    compare.csv    pair, dissimilarity, weight_distance, dist_a_to_init,
                   dist_b_to_init
    seven_path.csv position, segment, loss

Floats are written with repr (shortest round-trip), so identical values give
identical bytes.
"""

from __future__ import annotations

import csv


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_round_logs(path, round_logs) -> None:
    write_csv(path,
              ["round", "train_loss", "test_loss", "train_acc", "test_acc",
               "mean_client_dist", "mean_dist_to_global"],
              [[r.round, r.train_loss, r.test_loss, r.train_acc, r.test_acc,
                r.mean_client_dist, r.mean_dist_to_global] for r in round_logs])


def write_noise_records(path, records) -> None:
    rows = []
    for rec in records:
        for neuron in range(rec.norm_total.shape[0]):
            rows.append([rec.round, rec.iteration, neuron,
                         float(rec.norm_total[neuron]),
                         float(rec.norm_drift[neuron]),
                         float(rec.norm_bias[neuron])])
    write_csv(path, ["round", "iter", "neuron", "norm_total", "norm_drift",
                     "norm_bias"], rows)


def write_path_profile(path, samples_by_dataset) -> None:
    """samples_by_dataset: {dataset name: sequence of PathSample}."""
    rows = []
    for name, samples in samples_by_dataset.items():
        for s in samples:
            rows.append([s.nu, name, s.loss, s.accuracy])
    write_csv(path, ["nu", "dataset", "loss", "acc"], rows)


def write_barriers(path, rows) -> None:
    """rows: (round_or_pair, BarrierResult)."""
    write_csv(path, ["round_or_pair", "B", "absolute_barrier", "argmax_a"],
              [[label, b.value, b.absolute_barrier, b.argmax]
               for label, b in rows])


def write_landscape(path, grids) -> None:
    """grids: {dataset name: GridResult} in long format."""
    rows = []
    for name, grid in grids.items():
        for i, a in enumerate(grid.a_coords):
            for j, b in enumerate(grid.b_coords):
                rows.append([float(a), float(b), name,
                             float(grid.losses[i, j]),
                             float(grid.accuracies[i, j])])
    write_csv(path, ["a", "b", "dataset", "loss", "accuracy"], rows)


def write_distances(path, result) -> None:
    header = ["label", *result.labels]
    rows = [[label, *(float(v) for v in result.matrix[i])]
            for i, label in enumerate(result.labels)]
    write_csv(path, header, rows)


def write_dropout(path, rows) -> None:
    write_csv(path, ["run", "stage_round", "width", "keep_frac", "trial",
                     "dataset", "eps_d", "full_loss", "subnet_loss"], rows)


def write_noise_stats(path, rows) -> None:
    """rows: (run label, NoiseStats)."""
    write_csv(path, ["run", "mean", "max", "min"],
              [[label, s.mean, s.maximum, s.minimum] for label, s in rows])


def write_compare(path, rows) -> None:
    write_csv(path, ["pair", "dissimilarity", "weight_distance",
                     "dist_a_to_init", "dist_b_to_init"], rows)


def write_segment_profile(path, positions, losses, num_segments) -> None:
    write_csv(path, ["position", "segment", "loss"],
              [[float(p), min(int(p), num_segments - 1), float(v)]
               for p, v in zip(positions, losses)])
