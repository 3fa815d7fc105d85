import numpy as np
import pytest

from causalcorrupt import SceneConfig, generate_dataset, generate_scene, shipped_spec


@pytest.fixture(scope="session")
def small_config() -> SceneConfig:
    # 64px canvas keeps per-test rendering cheap; sizes scaled to fit.
    return SceneConfig(width=64, height=64, n_objects=(2, 4), size_range=(6.0, 14.0))


@pytest.fixture(scope="session")
def test_scenes(small_config):
    return [generate_scene(small_config, sid, 1234) for sid in range(6)]


@pytest.fixture(scope="session")
def checker_image() -> np.ndarray:
    # Deterministic non-trivial image: smooth gradients plus a checkerboard.
    h = w = 64
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.stack(
        [
            xx / (w - 1),
            yy / (h - 1),
            0.5 + 0.5 * (((yy // 8) + (xx // 8)) % 2),
        ],
        axis=-1,
    )
    return np.clip(img * 0.9 + 0.05, 0.0, 1.0)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory, small_config):
    """6-scene IID dataset shared by dataset/eval/cli tests (read-only)."""
    root = tmp_path_factory.mktemp("tiny") / "ds"
    doc = shipped_spec("iid_uniform")
    manifest = generate_dataset(
        doc, small_config, str(root), n_scenes=6, global_seed=77, workers=1
    )
    return manifest
