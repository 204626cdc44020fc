import pytest

from trigroove.model import GrooveAutoencoder, Hyperparams, save_weights


@pytest.fixture(scope="session")
def engine_model():
    """Untrained default-architecture model: generation plumbing does not
    care whether the weights are good, only the acceptance suite does."""
    return GrooveAutoencoder(Hyperparams(), seed=0)


@pytest.fixture(scope="session")
def weights_file(engine_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("weights") / "model.gw"
    save_weights(engine_model.weights, path)
    return path
