import numpy as np
import pytest

from snrge import AudioClip, DatasetConfig, WhistleRanges, build_dataset

MINI_RATE = 8000
MINI_SECONDS = 0.5


def make_tone(freq, rate=MINI_RATE, seconds=MINI_SECONDS, amp=0.5):
    t = np.arange(int(rate * seconds)) / rate
    return AudioClip(amp * np.sin(2 * np.pi * freq * t), rate)


def mini_dataset_config(**overrides):
    base = dict(
        grid=(-5.0, 10.0),
        clips_per_level=30,
        sample_rate=MINI_RATE,
        clip_seconds=MINI_SECONDS,
        noise_kind="pink",
        ranges=WhistleRanges(
            f_start_hz=(1000.0, 2000.0),
            bandwidth_hz=(500.0, 1000.0),
            duration_s=(0.2, 0.35),
        ),
        seed=42,
    )
    base.update(overrides)
    return DatasetConfig(**base)


@pytest.fixture(scope="session")
def mini_manifest(tmp_path_factory):
    out = tmp_path_factory.mktemp("mini_dataset")
    return build_dataset(mini_dataset_config(), out)
