import pytest

from breathline.cli import main
from breathline.evaluation import load_frame_corpus
from breathline.nn import BreathDetectorModel, ModelConfig, TrainConfig, save_model, train


@pytest.fixture(scope="session")
def podcast_dir(tmp_path_factory):
    """Three breathy 20s recordings with annotations and a manifest."""
    out = tmp_path_factory.mktemp("podcasts")
    code = main(
        ["synth", "--out", str(out), "--seed", "10", "--real", "3", "--fake", "0",
         "--duration-ms", "20000", "--speakers", "2"]
    )
    assert code == 0
    return out


@pytest.fixture(scope="session")
def frame_corpus(podcast_dir):
    return load_frame_corpus(podcast_dir / "manifest.csv")


@pytest.fixture(scope="session")
def detector(frame_corpus, tmp_path_factory):
    """A detector trained well enough for in-sample detection to be reliable."""
    model = BreathDetectorModel(ModelConfig(seed=3))
    train(model, [(i.features, i.frame_labels) for i in frame_corpus], TrainConfig(epochs=12, seed=3))
    path = tmp_path_factory.mktemp("detector") / "model.bin"
    save_model(path, model)
    return model, path


@pytest.fixture(scope="session")
def news_dir(tmp_path_factory):
    """8 real + 8 fake 15s samples across 2 real and 2 fake outlets."""
    out = tmp_path_factory.mktemp("news")
    code = main(
        ["synth", "--out", str(out), "--seed", "20", "--real", "8", "--fake", "8",
         "--duration-ms", "15000", "--speakers", "2", "--real-outlets", "2", "--fake-outlets", "2"]
    )
    assert code == 0
    return out
