import gzip
import struct

import numpy as np
import pytest
from PIL import Image

from rescnet.datasets import (ImageSet, augment_hflip, load_cifar, load_folder_dataset,
                              load_mnist, min_max_normalize, one_hot, write_mnist)
from rescnet.errors import (ConsistencyError, DatasetIOError, DimensionError, DomainError,
                            FormatError)


def _idx_pair(tmp_path, images, labels):
    ip, lp = tmp_path / "img", tmp_path / "lab"
    write_mnist(images, labels, ip, lp)
    return ip, lp


def test_mnist_layout(tmp_path):
    # pixel (row 1, col 2) of image 0 is 255; the rest zero
    images = np.zeros((2, 3, 4), dtype=np.uint8)
    images[0, 1, 2] = 255
    images[1] = 51
    s = load_mnist(*_idx_pair(tmp_path, images, [7, 3]))
    assert s.images.shape == (3, 4, 1, 2)
    assert s.images[1, 2, 0, 0] == 1.0
    assert s.images[:, :, 0, 0].sum() == 1.0
    np.testing.assert_allclose(s.images[..., 1], 0.2)
    np.testing.assert_array_equal(s.labels, [7, 3])
    assert s.class_count == 10


def test_mnist_gzip_matches_plain(tmp_path, rng):
    images = rng.integers(0, 256, (5, 6, 6), dtype=np.uint8)
    ip, lp = _idx_pair(tmp_path, images, [0, 1, 2, 3, 4])
    for p in (ip, lp):
        (tmp_path / (p.name + ".gz")).write_bytes(gzip.compress(p.read_bytes()))
    plain = load_mnist(ip, lp)
    zipped = load_mnist(tmp_path / "img.gz", tmp_path / "lab.gz")
    np.testing.assert_array_equal(plain.images, zipped.images)


def test_mnist_errors(tmp_path):
    ip, lp = _idx_pair(tmp_path, np.zeros((3, 2, 2), np.uint8), [1, 2, 3])
    bad = tmp_path / "bad"
    bad.write_bytes(struct.pack(">4I", 0x0802, 3, 2, 2) + bytes(12))
    with pytest.raises(FormatError):
        load_mnist(bad, lp)
    short = tmp_path / "short"
    short.write_bytes(ip.read_bytes()[:-1])
    with pytest.raises(FormatError):
        load_mnist(short, lp)
    other = tmp_path / "other"
    other.mkdir()
    _, lp2 = _idx_pair(other, np.zeros((2, 2, 2), np.uint8), [1, 2])
    with pytest.raises(ConsistencyError):
        load_mnist(ip, lp2)


def _cifar_record(label_bytes, plane_values):
    return bytes(label_bytes) + b"".join(bytes([v]) * 1024 for v in plane_values)


def test_cifar10_channel_planes(tmp_path):
    path = tmp_path / "batch.bin"
    path.write_bytes(_cifar_record([4], [255, 0, 51]) + _cifar_record([9], [0, 0, 0]))
    s = load_cifar(path, "cifar10")
    assert s.images.shape == (32, 32, 3, 2)
    np.testing.assert_allclose(s.images[5, 7, :, 0], [1.0, 0.0, 0.2])
    np.testing.assert_array_equal(s.labels, [4, 9])


def test_cifar100_uses_fine_label(tmp_path):
    path = tmp_path / "train.bin"
    path.write_bytes(_cifar_record([3, 77], [1, 2, 3]))
    s = load_cifar([path], "cifar100")
    assert s.class_count == 100 and s.labels[0] == 77


def test_cifar_truncated(tmp_path):
    path = tmp_path / "batch.bin"
    path.write_bytes(_cifar_record([1], [0, 0, 0])[:-5])
    with pytest.raises(FormatError):
        load_cifar(path)


def test_cifar_row_major_pixels(tmp_path):
    plane = np.arange(1024) % 256
    rec = bytes([0]) + bytes(plane.astype(np.uint8)) * 3
    path = tmp_path / "b.bin"
    path.write_bytes(rec)
    s = load_cifar(path)
    # byte j of a plane is row j // 32, column j % 32
    assert s.images[1, 3, 0, 0] == (35 % 256) / 255


def test_folder_dataset(tmp_path):
    for name, color in (("a.png", (255, 0, 0)), ("b.png", (0, 0, 255))):
        Image.new("RGB", (4, 3), color).save(tmp_path / name)
    manifest = tmp_path / "m.tsv"
    manifest.write_text("a.png\tzebra\t1\t2\nb.png\tant\n")
    s = load_folder_dataset(tmp_path, manifest)
    assert s.images.shape == (3, 4, 3, 2)
    np.testing.assert_array_equal(s.labels, [1, 0])  # ant < zebra
    np.testing.assert_allclose(s.images[0, 0, :, 0], [1, 0, 0])


def test_folder_dataset_names_bad_file(tmp_path):
    (tmp_path / "broken.png").write_bytes(b"not an image")
    manifest = tmp_path / "m.tsv"
    manifest.write_text("broken.png\tx\n")
    with pytest.raises(DatasetIOError, match="broken.png"):
        load_folder_dataset(tmp_path, manifest)


def test_image_set_validation():
    with pytest.raises(DimensionError):
        ImageSet(np.zeros((4, 4, 2, 3)), [0, 0, 0], 2)
    with pytest.raises(DomainError):
        ImageSet(np.zeros((4, 4, 1, 2)), [0, 5], 2)
    with pytest.raises(ConsistencyError):
        ImageSet(np.zeros((4, 4, 1, 2)), [0], 2)
    s = ImageSet(np.zeros((4, 4, 1, 2)), [0, 1], 2)
    assert not s.images.flags.writeable


def test_one_hot():
    np.testing.assert_array_equal(one_hot([2, 0], 3), [[0, 0, 1], [1, 0, 0]])
    with pytest.raises(DomainError):
        one_hot([3], 3)


def test_min_max_per_sample_and_channel():
    x = np.zeros((2, 2, 2, 2))
    x[..., 0, 0] = [[1, 3], [5, 9]]
    x[..., 1, 0] = 7.0  # constant plane
    x[..., 0, 1] = [[-2, 0], [0, 2]]
    out = min_max_normalize(x)
    np.testing.assert_allclose(out[..., 0, 0], [[0, 0.25], [0.5, 1]])
    np.testing.assert_array_equal(out[..., 1, 0], 0.0)
    np.testing.assert_allclose(out[..., 0, 1], [[0, 0.5], [0.5, 1]])


def test_hflip_mirrors_columns(rng):
    s = ImageSet(rng.random((3, 4, 1, 2)), [0, 1], 2)
    aug = augment_hflip(s)
    np.testing.assert_array_equal(aug.images[:, 0, 0, 2], s.images[:, 3, 0, 0])
    np.testing.assert_array_equal(aug.labels, [0, 1, 0, 1])


def test_min_max_three_points():
    x = np.array([2.0, 4.0, 6.0]).reshape(3, 1, 1, 1)
    np.testing.assert_array_equal(min_max_normalize(x).ravel(), [0, 0.5, 1])


def test_min_max_random_extremes(rng):
    out = min_max_normalize(rng.standard_normal((5, 6, 3, 4)))
    np.testing.assert_array_equal(out.min(axis=(0, 1)), 0.0)
    np.testing.assert_array_equal(out.max(axis=(0, 1)), 1.0)


def test_one_hot_round_trip(rng):
    v = rng.integers(0, 7, 50)
    np.testing.assert_array_equal(np.argmax(one_hot(v, 7), axis=1), v)


def test_black_cifar_record(tmp_path):
    path = tmp_path / "b.bin"
    path.write_bytes(bytes([3]) + bytes(3072))
    s = load_cifar(path)
    assert len(s) == 1 and s.labels[0] == 3 and not s.images.any()


def test_folder_missing_file(tmp_path):
    manifest = tmp_path / "m.tsv"
    manifest.write_text("gone.png\tcat\n")
    with pytest.raises(DatasetIOError, match="gone.png"):
        load_folder_dataset(tmp_path, manifest)


def test_folder_two_classes_three_files(tmp_path):
    lines = []
    for cls in ("dog", "cat"):
        for i in range(3):
            Image.new("L", (5, 5), 40 * i).save(tmp_path / f"{cls}{i}.png")
            lines.append(f"{cls}{i}.png\t{cls}")
    (tmp_path / "m.tsv").write_text("\n".join(lines) + "\n")
    s = load_folder_dataset(tmp_path, tmp_path / "m.tsv")
    assert len(s) == 6 and s.class_count == 2
    np.testing.assert_array_equal(s.labels, [1, 1, 1, 0, 0, 0])


def test_hflip_asymmetric_2x2():
    s = ImageSet(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(2, 2, 1, 1), [0], 1)
    np.testing.assert_array_equal(augment_hflip(s).images[..., 0, 1], [[2, 1], [4, 3]])
