import csv
import json

import numpy as np
import pytest

from fedmc.cli import main
from fedmc.config import ExperimentConfig
from fedmc.data import write_idx
from fedmc.errors import ConfigError


def base_config(**data_overrides):
    cfg = {
        "seed": 5,
        "data": {"kind": "synthetic", "num_classes": 3, "per_class": 40,
                 "dims": 8, "spread": 0.35, "test_per_class": 10},
        "architecture": {"hidden_count": 12, "output_dim": 3,
                         "scaling": "plain"},
        "federated": {"clients": 3, "alphas": [0.5], "rounds": 2,
                      "local_iters": 4, "batch_size": 8, "lr": 0.05,
                      "momentum": 0.9, "loss": "cross_entropy",
                      "checkpoint_rounds": "final"},
    }
    cfg.update(data_overrides)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestConfigValidation:
    def test_zero_clients_names_the_field(self):
        cfg = base_config()
        cfg["federated"]["clients"] = 0
        with pytest.raises(ConfigError, match="clients"):
            ExperimentConfig.from_dict(cfg)

    def test_unknown_key_rejected(self):
        cfg = base_config()
        cfg["federated"]["bogus_knob"] = 1
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(cfg)
        cfg = base_config()
        cfg["speling_mistake"] = {}
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(cfg)

    def test_invalid_config_exits_nonzero(self, tmp_path, capsys):
        cfg = base_config()
        cfg["federated"]["clients"] = 0
        path = write_config(tmp_path, cfg)
        rc = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "clients" in capsys.readouterr().err


class TestRun:
    def test_smoke_round_log_rows(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out = tmp_path / "out"
        assert main(["run", "--config", str(path), "--out", str(out)]) == 0
        rows = read_rows(out / "a0.5" / "round_log.csv")
        assert len(rows) == 2
        assert list(rows[0].keys()) == ["round", "train_loss", "test_loss",
                                        "train_acc", "test_acc",
                                        "mean_client_dist",
                                        "mean_dist_to_global"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 5
        assert "config_sha256" in manifest

    def test_rerun_reproduces_csv_bytes(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["run", "--config", str(path), "--out", str(out1)]) == 0
        assert main(["run", "--config", str(path), "--out", str(out2)]) == 0
        a = (out1 / "a0.5" / "round_log.csv").read_bytes()
        b = (out2 / "a0.5" / "round_log.csv").read_bytes()
        assert a == b

    def test_seed_override_changes_results(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        main(["run", "--config", str(path), "--out", str(out1)])
        main(["run", "--config", str(path), "--out", str(out2), "--seed", "9"])
        a = (out1 / "a0.5" / "round_log.csv").read_bytes()
        b = (out2 / "a0.5" / "round_log.csv").read_bytes()
        assert a != b

    def test_idx_ingestion(self, tmp_path, rng):
        images = rng.integers(0, 256, size=(60, 4, 4)).astype(np.uint8)
        labels = np.repeat(np.arange(3), 20).astype(np.uint8)
        write_idx(images, labels, tmp_path / "ti.idx", tmp_path / "tl.idx")
        cfg = base_config(data={"kind": "idx",
                                "train_images": str(tmp_path / "ti.idx"),
                                "train_labels": str(tmp_path / "tl.idx")})
        path = write_config(tmp_path, cfg)
        out = tmp_path / "out"
        assert main(["run", "--config", str(path), "--out", str(out)]) == 0
        assert (out / "a0.5" / "round_log.csv").exists()


class TestSubcommands:
    @pytest.fixture
    def trained(self, tmp_path):
        cfg = base_config()
        cfg["federated"]["alphas"] = [0.5, "iid"]
        path = write_config(tmp_path, cfg)
        out = tmp_path / "out"
        assert main(["run", "--config", str(path), "--out", str(out)]) == 0
        return path, out

    def test_path_identical_endpoints_is_flat(self, trained, tmp_path, capsys):
        cfg_path, out = trained
        ckpt = out / "a0.5" / "final.ckpt"
        dest = tmp_path / "path-out"
        rc = main(["path", "--config", str(cfg_path), "--start", str(ckpt),
                   "--end", str(ckpt), "--grid", "9", "--out", str(dest)])
        assert rc == 0
        assert "connectivity error" in capsys.readouterr().out
        rows = read_rows(dest / "path.csv")
        train_losses = {row["loss"] for row in rows
                        if row["dataset"] == "train"}
        assert len(train_losses) == 1  # flat profile

    def test_dropout_full_keep_zero(self, trained, tmp_path):
        cfg_path, out = trained
        dest = tmp_path / "drop-out"
        rc = main(["dropout", "--config", str(cfg_path), "--checkpoint",
                   str(out / "a0.5" / "final.ckpt"), "--keep-frac", "1.0",
                   "--trials", "2", "--out", str(dest)])
        assert rc == 0
        rows = read_rows(dest / "dropout.csv")
        assert rows and all(float(r["eps_d"]) == 0.0 for r in rows)

    def test_barrier_pair_and_per_round(self, trained, tmp_path):
        cfg_path, out = trained
        dest = tmp_path / "bar-out"
        rc = main(["barrier", "--config", str(cfg_path),
                   "--start", str(out / "a0.5" / "final.ckpt"),
                   "--end", str(out / "iid" / "final.ckpt"),
                   "--grid", "7", "--out", str(dest)])
        assert rc == 0
        rows = read_rows(dest / "barrier.csv")
        assert len(rows) == 1 and rows[0]["round_or_pair"] == "pair"

    def test_seven_path_profile(self, trained, tmp_path):
        cfg_path, out = trained
        dest = tmp_path / "seven-out"
        rc = main(["seven-path", "--config", str(cfg_path),
                   "--start", str(out / "a0.5" / "final.ckpt"),
                   "--end", str(out / "iid" / "final.ckpt"),
                   "--points", "5", "--out", str(dest)])
        assert rc == 0
        rows = read_rows(dest / "seven_path.csv")
        assert float(rows[0]["position"]) == 0.0
        assert float(rows[-1]["position"]) == 7.0

    def test_compare_outputs(self, trained, tmp_path):
        cfg_path, out = trained
        dest = tmp_path / "cmp-out"
        rc = main(["compare", "--config", str(cfg_path),
                   "--checkpoints", str(out / "a0.5" / "final.ckpt"),
                   str(out / "iid" / "final.ckpt"),
                   "--init", str(out / "init.ckpt"), "--out", str(dest)])
        assert rc == 0
        rows = read_rows(dest / "compare.csv")
        assert len(rows) == 1
        assert 0.0 <= float(rows[0]["dissimilarity"]) <= 1.0

    def test_curve_find_writes_bend(self, trained, tmp_path):
        cfg_path, out = trained
        dest = tmp_path / "cf-out"
        rc = main(["curve-find", "--config", str(cfg_path),
                   "--start", str(out / "a0.5" / "final.ckpt"),
                   "--end", str(out / "iid" / "final.ckpt"),
                   "--steps", "20", "--out", str(dest)])
        assert rc == 0
        assert (dest / "bend.ckpt").exists()

    def test_landscape_grid(self, trained, tmp_path):
        cfg_path, out = trained
        dest = tmp_path / "ls-out"
        rc = main(["landscape", "--config", str(cfg_path),
                   "--origin", str(out / "init.ckpt"),
                   "--axis1", str(out / "a0.5" / "final.ckpt"),
                   "--axis2", str(out / "iid" / "final.ckpt"),
                   "--resolution", "3", "--out", str(dest)])
        assert rc == 0
        rows = read_rows(dest / "landscape.csv")
        assert len(rows) == 9

    def test_train_fed_single_run(self, tmp_path):
        cfg_path = write_config(tmp_path, base_config())
        dest = tmp_path / "tf-out"
        rc = main(["train-fed", "--config", str(cfg_path), "--alpha", "iid",
                   "--out", str(dest)])
        assert rc == 0
        assert (dest / "iid" / "round_log.csv").exists()

    def test_incompatible_checkpoints_rejected(self, trained, tmp_path):
        cfg_path, out = trained
        other_cfg = base_config()
        other_cfg["architecture"]["hidden_count"] = 9
        other_path = write_config(tmp_path, other_cfg, "other.json")
        dest = tmp_path / "tf2-out"
        assert main(["train-fed", "--config", str(other_path), "--out",
                     str(dest)]) == 0
        rc = main(["barrier", "--config", str(cfg_path),
                   "--start", str(out / "a0.5" / "final.ckpt"),
                   "--end", str(dest / "a0.5" / "final.ckpt"),
                   "--out", str(tmp_path / "bx")])
        assert rc == 2
