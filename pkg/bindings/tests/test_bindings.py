"""Bridge contract tests plus the cross-interface acceptance check.

The final test prints an "[acceptance] criterion 10 ..." line, extending
the scorecard emitted by the core package's acceptance suite.
"""
from __future__ import annotations

from contextlib import contextmanager

import numpy as np
import numpy.testing as npt
import pytest
import yaml

import stainforge_bindings as bridge
from stainforge.cli import main
from stainforge.imageio import find_images, load_rgb, save_png
from stainforge.pipeline import MissingDistribution
from stainforge.stats import InsufficientSamples, StyleDistribution
from stainforge.statsfile import dumps_stats, parse_stats
from stainforge_bindings import py_fit, py_transform


def _tile(rng, size=32):
    base = rng.integers(45, 211, 3)
    return np.clip(base + rng.normal(0.0, 18.0, (size, size, 3)), 20, 235).astype(np.uint8)


@contextmanager
def criterion(num: int, name: str):
    try:
        yield
    except BaseException:
        print(f"[acceptance] criterion {num:02d} FAIL: {name}", flush=True)
        raise
    print(f"[acceptance] criterion {num:02d} PASS: {name}", flush=True)


class TestSurface:
    def test_exactly_two_entry_points_plus_version(self):
        assert sorted(bridge.__all__) == ["__version__", "py_fit", "py_transform"]
        assert callable(bridge.py_fit)
        assert callable(bridge.py_transform)
        assert isinstance(bridge.__version__, str) and bridge.__version__


class TestViewValidation:
    def test_wrong_dtype_is_an_immediate_typed_error(self):
        rng = np.random.default_rng(0)
        bad = _tile(rng).astype(np.float32)
        with pytest.raises(TypeError, match="uint8"):
            py_transform(bad, {"mode": "passthrough"})
        with pytest.raises(TypeError, match="uint8"):
            py_fit([_tile(rng), bad])

    def test_non_array_rejected(self):
        with pytest.raises(TypeError, match="numpy array"):
            py_transform([[0, 0, 0]], {"mode": "passthrough"})

    def test_wrong_shape_rejected(self):
        rng = np.random.default_rng(1)
        with pytest.raises(ValueError, match="shape"):
            py_transform(np.zeros((8, 8, 4), np.uint8), {"mode": "passthrough"})
        with pytest.raises(ValueError, match="shape"):
            py_fit([_tile(rng), np.zeros((8, 8), np.uint8)])

    def test_non_contiguous_rejected(self):
        img = np.zeros((8, 16, 3), np.uint8)[:, ::2, :]
        with pytest.raises(ValueError, match="contiguous"):
            py_transform(img, {"mode": "passthrough"})

    def test_validation_happens_before_any_fit_work(self):
        rng = np.random.default_rng(2)
        good = [_tile(rng) for _ in range(40)]
        with pytest.raises(TypeError):
            py_fit([*good, good[0].astype(np.int16)])


class TestFit:
    def test_single_image_surfaces_insufficient_samples(self):
        rng = np.random.default_rng(3)
        with pytest.raises(InsufficientSamples) as excinfo:
            py_fit([_tile(rng)])
        assert isinstance(excinfo.value, ValueError)

    def test_text_parses_and_respects_spaces_and_family(self):
        rng = np.random.default_rng(4)
        text = py_fit([_tile(rng) for _ in range(3)], spaces=("lab",), family="laplace")
        fitted = parse_stats(text)
        assert list(fitted) == ["lab"]
        assert fitted["lab"].family.kind == "laplace"


class TestTransform:
    def test_passthrough_returns_an_independent_copy(self):
        img = _tile(np.random.default_rng(5))
        out = py_transform(img, {"mode": "passthrough"})
        assert out.tobytes() == img.tobytes()
        assert not np.shares_memory(out, img)

    def test_zero_variance_random_equals_mean_template(self):
        rng = np.random.default_rng(6)
        style = StyleDistribution(
            "lab",
            np.array([55.0, 25.0, -10.0]),
            np.zeros(3),
            np.array([8.0, 6.0, 5.0]),
            np.zeros(3),
            n_samples=12,
        )
        text = dumps_stats({"lab": style})
        for _ in range(5):
            img = _tile(rng)
            a = py_transform(img, {"mode": "random", "stats": text, "space_probs": {"lab": 1.0}}, seed=1)
            b = py_transform(img, {"mode": "sn", "stats": text, "space": "lab"}, seed=9)
            assert a.tobytes() == b.tobytes()

    def test_missing_distribution_surfaced_as_value_error(self):
        img = _tile(np.random.default_rng(7))
        with pytest.raises(MissingDistribution) as excinfo:
            py_transform(img, {"mode": "sn", "space": "lab"})
        assert isinstance(excinfo.value, ValueError)

    def test_unknown_config_keys_rejected(self):
        img = _tile(np.random.default_rng(8))
        with pytest.raises(ValueError, match="unknown config keys"):
            py_transform(img, {"mode": "passthrough", "colour": "lab"})

    def test_stats_mapping_mirrors_the_file(self):
        rng = np.random.default_rng(9)
        imgs = [_tile(rng) for _ in range(3)]
        text = py_fit(imgs)
        docs = {doc["color_space"]: doc for doc in yaml.safe_load_all(text)}
        img = _tile(rng)
        from_text = py_transform(img, text, seed=11)
        from_docs = py_transform(img, docs, seed=11)
        assert from_text.tobytes() == from_docs.tobytes()

    def test_index_selects_the_batch_stream(self):
        rng = np.random.default_rng(10)
        imgs = [_tile(rng) for _ in range(3)]
        text = py_fit(imgs)
        img = _tile(rng)
        a = py_transform(img, {"stats": text, "index": 0}, seed=3)
        b = py_transform(img, {"stats": text, "index": 1}, seed=3)
        assert a.tobytes() != b.tobytes()


class TestCrossInterface:
    def test_criterion_10_matches_cli_bytes(self, tmp_path, capsys):
        with criterion(10, "array bridge equals the CLI byte-for-byte"):
            rng = np.random.default_rng(100)
            src = tmp_path / "in"
            (src / "nested").mkdir(parents=True)
            for i in range(20):
                d = src / "nested" if i % 3 == 0 else src
                save_png(d / f"tile_{i:02d}.png", _tile(rng, size=24 + (i % 4) * 8))

            stats_path = tmp_path / "style.yaml"
            assert main(["fit", "--input-dir", str(src), "--out", str(stats_path)]) == 0
            capsys.readouterr()
            inputs = find_images(src)
            text = py_fit([load_rgb(p) for p in inputs])
            file_text = stats_path.read_text()
            assert text == file_text
            mine, cli = parse_stats(text), parse_stats(file_text)
            for space in cli:
                npt.assert_allclose(mine[space].mean_of_avg, cli[space].mean_of_avg, rtol=1e-12)
                npt.assert_allclose(mine[space].var_of_avg, cli[space].var_of_avg, rtol=1e-12)
                npt.assert_allclose(mine[space].mean_of_std, cli[space].mean_of_std, rtol=1e-12)
                npt.assert_allclose(mine[space].var_of_std, cli[space].var_of_std, rtol=1e-12)

            configs = {
                "random": (
                    ["--stats", str(stats_path), "--space-probs", "0.4,0.3,0.3"],
                    {"mode": "random", "stats": file_text, "space_probs": (0.4, 0.3, 0.3)},
                ),
                "sn": (
                    ["--stats", str(stats_path), "--space", "hed"],
                    {"mode": "sn", "stats": file_text, "space": "hed"},
                ),
                "passthrough": ([], {"mode": "passthrough"}),
            }
            for mode, (cli_extra, base_config) in configs.items():
                out = tmp_path / f"out_{mode}"
                argv = ["apply", "--input-dir", str(src), "--output-dir", str(out),
                        "--mode", mode, "--seed", "777", *cli_extra]
                assert main(argv) == 0
                capsys.readouterr()
                for i, in_path in enumerate(inputs):
                    rel = in_path.relative_to(src).with_suffix(".png")
                    cli_pixels = load_rgb(out / rel)
                    bridged = py_transform(load_rgb(in_path), {**base_config, "index": i}, seed=777)
                    assert bridged.tobytes() == cli_pixels.tobytes(), (mode, str(rel))
