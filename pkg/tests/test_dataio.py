import numpy as np
import pytest

from whtfire import arch, dataio
from whtfire.errors import (
    ArchMismatchError,
    BadMagicError,
    ManifestError,
    TensorShapeMismatchError,
    TruncatedFileError,
    UnsupportedMaxvalError,
    VersionMismatchError,
)


class TestPpmCodec:
    def test_single_white_pixel(self, tmp_path):
        p = tmp_path / "w.ppm"
        p.write_bytes(b"P6\n1 1\n255\n\xff\xff\xff")
        img = dataio.ppm_read(p)
        assert img.shape == (1, 1, 3)
        assert np.allclose(img, 1.0)

    def test_roundtrip_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.random((13, 7, 3))
        a, b = tmp_path / "a.ppm", tmp_path / "b.ppm"
        dataio.ppm_write(img, a)
        dataio.ppm_write(dataio.ppm_read(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_values_scaled_to_unit_interval(self, tmp_path):
        p = tmp_path / "g.ppm"
        p.write_bytes(b"P6\n2 1\n255\n" + bytes([0, 0, 0, 128, 64, 255]))
        img = dataio.ppm_read(p)
        assert img.min() == 0.0 and img.max() == 1.0
        assert abs(img[0, 1, 0] - 128 / 255) <= 1e-12

    def test_header_comments_are_skipped(self, tmp_path):
        p = tmp_path / "c.ppm"
        p.write_bytes(b"P6\n# a comment\n1 1\n# another\n255\n\x00\x01\x02")
        img = dataio.ppm_read(p)
        assert img.shape == (1, 1, 3)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "p5.ppm"
        p.write_bytes(b"P5\n1 1\n255\n\x00")
        with pytest.raises(BadMagicError):
            dataio.ppm_read(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "t.ppm"
        p.write_bytes(b"P6\n2 2\n255\n\x00\x00\x00")
        with pytest.raises(TruncatedFileError):
            dataio.ppm_read(p)

    def test_unsupported_maxval(self, tmp_path):
        p = tmp_path / "m.ppm"
        p.write_bytes(b"P6\n1 1\n65535\n\x00\x00\x00\x00\x00\x00")
        with pytest.raises(UnsupportedMaxvalError):
            dataio.ppm_read(p)

    def test_write_rejects_non_rgb(self, tmp_path):
        with pytest.raises(ValueError):
            dataio.ppm_write(np.zeros((4, 4)), tmp_path / "x.ppm")


class TestManifest:
    def test_parse_and_roundtrip(self, tmp_path):
        text = "# header comment\nimgs/a.ppm,0\n\nimgs/b.ppm,1\n"
        p = tmp_path / "manifest.csv"
        p.write_text(text)
        man = dataio.load_manifest(p)
        assert man.entries == [("imgs/a.ppm", 0), ("imgs/b.ppm", 1)]
        assert man.root == tmp_path
        out = tmp_path / "copy.csv"
        dataio.save_manifest(man, out)
        assert dataio.load_manifest(out).entries == man.entries

    def test_bad_label_reports_line_number(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("a.ppm,0\nb.ppm,2\n")
        with pytest.raises(ManifestError, match=":2:"):
            dataio.load_manifest(p)

    def test_duplicate_path_rejected(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("a.ppm,0\na.ppm,1\n")
        with pytest.raises(ManifestError, match="duplicate"):
            dataio.load_manifest(p)

    def test_malformed_row_rejected(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("a.ppm;0\n")
        with pytest.raises(ManifestError, match=":1:"):
            dataio.load_manifest(p)


class TestSynthDataset:
    def test_deterministic_bytes(self, tmp_path):
        cfg = dataio.SynthConfig(seed=5, count_per_class=3, resolution=16,
                                 smoke_contrast=0.7)
        man_a = dataio.synth_dataset(cfg, tmp_path / "a")
        man_b = dataio.synth_dataset(cfg, tmp_path / "b")
        assert [e for e in man_a.entries] == [e for e in man_b.entries]
        for (rel, _), (rel_b, _) in zip(man_a.entries, man_b.entries):
            assert (tmp_path / "a" / rel).read_bytes() == (
                tmp_path / "b" / rel_b
            ).read_bytes()

    def test_counts_and_balance(self, tmp_path):
        cfg = dataio.SynthConfig(seed=1, count_per_class=100, resolution=8)
        man = dataio.synth_dataset(cfg, tmp_path / "d")
        assert len(man) == 200
        labels = man.labels()
        assert labels.sum() == 100

    def test_blobs_are_localized(self):
        # class means differ by less than the blob amplitude
        cfg = dataio.SynthConfig(seed=2, count_per_class=100, resolution=16,
                                 smoke_contrast=0.8)
        mean0 = np.mean([dataio.synth_image(cfg, i, 0).mean() for i in range(100)])
        mean1 = np.mean([dataio.synth_image(cfg, i, 1).mean() for i in range(100)])
        assert abs(mean1 - mean0) < cfg.smoke_contrast

    def test_zero_contrast_classes_identical_in_distribution(self):
        cfg = dataio.SynthConfig(seed=3, count_per_class=50, resolution=16,
                                 smoke_contrast=0.0)
        mean0 = np.mean([dataio.synth_image(cfg, i, 0).mean() for i in range(50)])
        mean1 = np.mean([dataio.synth_image(cfg, i, 1).mean() for i in range(50)])
        assert abs(mean1 - mean0) < 0.05

    def test_config_validation(self):
        with pytest.raises(ValueError):
            dataio.SynthConfig(count_per_class=0)
        with pytest.raises(ValueError):
            dataio.SynthConfig(smoke_contrast=1.5)


class TestCheckpoint:
    def _net(self, **kw):
        return arch.build_toy_net("wht", 8, 32, seed=9, **kw)

    def test_save_load_save_identical_bytes(self, tmp_path):
        net = self._net()
        a, b = tmp_path / "a.whtc", tmp_path / "b.whtc"
        dataio.checkpoint_save(net, {"epoch": "25"}, a)
        loaded = dataio.checkpoint_load(a)
        dataio.checkpoint_save(loaded, {"epoch": "25"}, b)
        assert a.read_bytes() == b.read_bytes()

    def test_tensors_roundtrip_bit_exact(self, tmp_path):
        net = self._net()
        p = tmp_path / "c.whtc"
        dataio.checkpoint_save(net, {}, p)
        loaded = dataio.checkpoint_load(p)
        assert set(loaded.parameters) == set(net.parameters)
        for name in net.parameters:
            assert np.array_equal(loaded.parameters[name], net.parameters[name])

    def test_forward_identical_after_reload(self, tmp_path):
        net = self._net()
        p = tmp_path / "c.whtc"
        dataio.checkpoint_save(net, {}, p)
        loaded = dataio.checkpoint_load(p)
        patch = np.random.default_rng(0).random((32, 32, 3)).astype(np.float32)
        assert np.array_equal(
            arch.forward_classify(net, patch), arch.forward_classify(loaded, patch)
        )

    def test_load_into_mismatched_width(self, tmp_path):
        net = self._net()
        p = tmp_path / "c.whtc"
        dataio.checkpoint_save(net, {}, p)
        other = arch.toy_descriptor("wht", width=16)
        with pytest.raises(ArchMismatchError):
            dataio.checkpoint_load(p, expected=other)

    def test_load_into_mismatched_variant(self, tmp_path):
        net = self._net()
        p = tmp_path / "c.whtc"
        dataio.checkpoint_save(net, {}, p)
        other = arch.toy_descriptor("conv-baseline", width=8)
        with pytest.raises(ArchMismatchError):
            dataio.checkpoint_load(p, expected=other)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "junk.whtc"
        p.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(BadMagicError):
            dataio.checkpoint_load(p)

    def test_version_mismatch(self, tmp_path):
        net = self._net()
        p = tmp_path / "c.whtc"
        dataio.checkpoint_save(net, {}, p)
        raw = bytearray(p.read_bytes())
        raw[4] = 99  # bump the little-endian version field
        p.write_bytes(bytes(raw))
        with pytest.raises(VersionMismatchError):
            dataio.checkpoint_load(p)

    def test_truncated_checkpoint(self, tmp_path):
        net = self._net()
        p = tmp_path / "c.whtc"
        dataio.checkpoint_save(net, {}, p)
        p.write_bytes(p.read_bytes()[:-20])
        with pytest.raises(TruncatedFileError):
            dataio.checkpoint_load(p)

    def test_tensor_shape_mismatch(self, tmp_path):
        net = self._net()
        net.parameters["head.bias"] = np.zeros(3, dtype=np.float32)  # sabotage
        p = tmp_path / "c.whtc"
        dataio.checkpoint_save(net, {}, p)
        with pytest.raises(TensorShapeMismatchError):
            dataio.checkpoint_load(p)

    def test_float64_networks_persist_as_float32(self, tmp_path):
        net = self._net(dtype=np.float64)
        p = tmp_path / "c.whtc"
        dataio.checkpoint_save(net, {}, p)
        loaded = dataio.checkpoint_load(p)
        assert loaded.parameters["head.weight"].dtype == np.float32
