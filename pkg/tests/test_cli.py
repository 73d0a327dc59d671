import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from usaug.cli import GUTTER, MANIFEST_NAME, main
from usaug.io import Pair, load_sample, raw_to_image, raw_to_mask, read_png
from usaug.pipeline import AugmentationRecord, pixel_checksum, quantize_image, replay
from usaug.snr import energy_floor, local_energy, monogenic

from conftest import disk_phantom, rect_phantom


def write_dataset(root: Path, samples, image_bits=8, mask_bits=8):
    (root / "images").mkdir(parents=True)
    (root / "masks").mkdir(parents=True)
    for s in samples:
        if image_bits == 16:
            img = Image.fromarray(np.rint(s.image * 65535).astype(np.uint16))
        else:
            img = Image.fromarray(np.rint(s.image * 255).astype(np.uint8))
        img.save(root / "images" / f"{s.id}.png")
        if mask_bits == 16:
            Image.fromarray(s.mask.astype(np.uint16) * 65535).save(root / "masks" / f"{s.id}.png")
        else:
            Image.fromarray(s.mask * 255).save(root / "masks" / f"{s.id}.png")
    return root


@pytest.fixture
def dataset(tmp_path):
    samples = [rect_phantom(shape=(96, 80), top=50, bottom=58, seed=i).replace(id=f"f{i}") for i in range(3)]
    samples.append(disk_phantom(shape=(96, 80), centre_row=30, seed=7).replace(id="f3"))
    return write_dataset(tmp_path / "data", samples)


def write_config(path: Path, **doc):
    path.write_text(json.dumps({"schema": 1, **doc}))
    return str(path)


def manifest(out: Path):
    return [json.loads(line) for line in (out / MANIFEST_NAME).read_text().splitlines()]


class TestAugment:
    def test_counts_and_names(self, dataset, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path / "c.json", seed=3, replicas=3)
        assert main(["augment", "-c", cfg, "-i", str(dataset), "-o", str(out)]) == 0
        lines = manifest(out)
        assert len(lines) == 12
        assert len(list((out / "images").glob("*.png"))) == 12
        assert len(list((out / "masks").glob("*.png"))) == 12
        assert lines[0]["output_id"] == "f0_r000" and lines[-1]["output_id"] == "f3_r002"
        assert all(line["schema"] == 1 for line in lines)

    def test_manifest_checksums_match_files(self, dataset, tmp_path):
        out = tmp_path / "out"
        assert main(["augment", "-i", str(dataset), "-o", str(out), "--seed", "4"]) == 0
        for line in manifest(out):
            img_raw, depth = read_png(out / line["image_file"])
            msk_raw, mdepth = read_png(out / line["mask_file"])
            assert depth == 16
            assert pixel_checksum(img_raw) == line["image_checksum"]
            assert pixel_checksum(raw_to_mask(msk_raw, mdepth)) == line["mask_checksum"]

    def test_rerun_and_threads_identical(self, dataset, tmp_path):
        runs = []
        for name, threads in (("a", "1"), ("b", "1"), ("c", "8")):
            out = tmp_path / name
            assert main(["augment", "-i", str(dataset), "-o", str(out), "--seed", "9", "--replicas", "2", "--threads", threads]) == 0
            files = {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*.png"))}
            runs.append(((out / MANIFEST_NAME).read_bytes(), files))
        assert runs[0] == runs[1] == runs[2]

    def test_different_seed_differs(self, dataset, tmp_path):
        main(["augment", "-i", str(dataset), "-o", str(tmp_path / "a"), "--seed", "1"])
        main(["augment", "-i", str(dataset), "-o", str(tmp_path / "b"), "--seed", "2"])
        assert manifest(tmp_path / "a") != manifest(tmp_path / "b")

    def test_missing_mask(self, dataset, tmp_path, capsys):
        (dataset / "masks" / "f2.png").unlink()
        assert main(["augment", "-i", str(dataset), "-o", str(tmp_path / "o")]) == 2
        assert "f2" in capsys.readouterr().err

    def test_unknown_key(self, dataset, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", colour="blue")
        assert main(["augment", "-c", cfg, "-i", str(dataset), "-o", str(tmp_path / "o")]) == 1
        assert "colour" in capsys.readouterr().err

    def test_bad_json(self, dataset, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["augment", "-c", str(bad), "-i", str(dataset), "-o", str(tmp_path / "o")]) == 1

    def test_usage_error_is_config_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["augment"])
        assert exc.value.code == 1

    def test_no_output_dir(self, dataset):
        assert main(["augment", "-i", str(dataset)]) == 1

    def test_processing_error(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        tiny = rect_phantom(shape=(3, 3), top=1, bottom=2, left=0, right=3).replace(
            id="tiny", image=rng.random((3, 3))
        )
        data = write_dataset(tmp_path / "d", [tiny])
        assert main(["augment", "-i", str(data), "-o", str(tmp_path / "o")]) == 3
        assert "tiny" in capsys.readouterr().err


class TestPreview:
    def test_dimensions(self, dataset, tmp_path):
        out = tmp_path / "p.png"
        assert main(["preview", "-i", str(dataset), "-o", str(out), "-n", "2"]) == 0
        with Image.open(out) as im:
            assert im.size == (5 * 80 + 4 * GUTTER, 2 * 96 + GUTTER)

    def test_neutral_columns_match(self, dataset, tmp_path):
        cfg = write_config(
            tmp_path / "n.json",
            deform={"d_probe": [0, 0]},
            reverb={"r_i": [0, 0]},
            snr={"i_b": [1, 1], "i_bg": [1, 1]},
        )
        out = tmp_path / "p.png"
        assert main(["preview", "-c", cfg, "-i", str(dataset), "-o", str(out), "-n", "1"]) == 0
        grid = np.asarray(Image.open(out)).astype(int)
        tiles = [grid[:96, c * (80 + GUTTER) : c * (80 + GUTTER) + 80] for c in range(5)]
        np.testing.assert_array_equal(tiles[1], tiles[0])
        np.testing.assert_array_equal(tiles[2], tiles[0])
        # energy normalisation is an identity only where the local energy is strong
        raw, depth = read_png(dataset / "images" / "f0.png")
        le = local_energy(monogenic(raw_to_image(raw, depth)))
        strong = le >= 100 * energy_floor(le, 1e-3)
        assert strong.sum() > 100
        for t in tiles[3:]:
            diff = np.abs(t - tiles[0])[strong]
            assert diff.max() <= 1 + 0.01 * 255

    def test_empty_dataset(self, tmp_path):
        root = tmp_path / "empty"
        (root / "images").mkdir(parents=True)
        (root / "masks").mkdir()
        assert main(["preview", "-i", str(root), "-o", str(tmp_path / "p.png")]) == 2


class TestValidate:
    def test_clean(self, dataset, capsys):
        assert main(["validate", str(dataset)]) == 0
        assert "0 errors, 0 notes" in capsys.readouterr().out

    def test_mixed_depth_is_info(self, tmp_path):
        s = rect_phantom(shape=(32, 32), top=10, bottom=14, left=4, right=28).replace(id="m")
        data = write_dataset(tmp_path / "d", [s], image_bits=16, mask_bits=8)
        report = tmp_path / "r.json"
        assert main(["validate", str(data), "--json", str(report)]) == 0
        findings = json.loads(report.read_text())["findings"]
        assert [f["code"] for f in findings] == ["mixed-bit-depth"]
        assert findings[0]["severity"] == "info"

    def test_gray_mask(self, dataset, capsys):
        m = np.zeros((96, 80), np.uint8)
        m[10:20, 10:20] = 255
        m[30, 30] = 127
        Image.fromarray(m).save(dataset / "masks" / "f1.png")
        assert main(["validate", str(dataset)]) == 2
        assert "non-binary mask" in capsys.readouterr().out

    def test_dimension_mismatch(self, dataset):
        Image.fromarray(np.zeros((10, 10), np.uint8)).save(dataset / "masks" / "f0.png")
        assert main(["validate", str(dataset)]) == 2

    def test_missing_dirs(self, tmp_path):
        assert main(["validate", str(tmp_path / "nowhere")]) == 2


class TestStats:
    def test_in_range(self, dataset, tmp_path, capsys):
        out = tmp_path / "o"
        main(["augment", "-i", str(dataset), "-o", str(out), "--replicas", "2"])
        report = tmp_path / "s.json"
        assert main(["stats", str(out / MANIFEST_NAME), "--json", str(report)]) == 0
        params = json.loads(report.read_text())["parameters"]
        assert params["deform.d_probe"]["count"] == 8
        assert params["reverb.r_i"]["outside"] == 0

    def test_out_of_range(self, dataset, tmp_path):
        out = tmp_path / "o"
        cfg = write_config(tmp_path / "wide.json", deform={"d_probe": [0, 200]})
        main(["augment", "-c", cfg, "-i", str(dataset), "-o", str(out), "--replicas", "5"])
        assert main(["stats", str(out / MANIFEST_NAME)]) == 2
        assert main(["stats", str(out / MANIFEST_NAME), "-c", cfg]) == 0


def test_loaded_values_normalized(dataset):
    raw, depth = read_png(dataset / "images" / "f0.png")
    img = raw_to_image(raw, depth)
    assert depth == 8 and img.min() >= 0 and img.max() <= 1


def test_manifest_line_replays(dataset, tmp_path):
    out = tmp_path / "o"
    assert main(["augment", "-i", str(dataset), "-o", str(out), "--seed", "12"]) == 0
    line = manifest(out)[1]
    rec = AugmentationRecord.from_dict(line)
    stem = line["input_id"]
    sample = load_sample(Pair(stem, dataset / "images" / f"{stem}.png", dataset / "masks" / f"{stem}.png"))
    again = replay(sample, rec)
    written, _ = read_png(out / line["image_file"])
    np.testing.assert_array_equal(quantize_image(again.image), written)
