from .corpus import synth_corpus, synth_pattern
from .gradcheck import grad_check
from .params import (TINY_HPARAMS, Hyperparams, ModelWeights, ParamStore,
                     load_weights, save_weights)
from .training import (Adam, TrainConfig, TrainMetrics, TrainingDiverged,
                       beta_at_epoch, evaluate_reconstruction, hit_f1, train)
from .vae import (DecodedGrids, DensityMap, GrooveAutoencoder, LatentGaussian,
                  LossParts, extract_pattern, kl_divergence, reparameterize)


def build_autoencoder(hp: Hyperparams) -> ModelWeights:
    """Architecture factory for the weights-file loader."""
    return GrooveAutoencoder(hp).weights


def load_autoencoder(path) -> GrooveAutoencoder:
    """Load a weights file and return a ready-to-run model."""
    holder = {}

    def build(hp: Hyperparams) -> ModelWeights:
        holder["model"] = GrooveAutoencoder(hp)
        return holder["model"].weights

    load_weights(path, build)
    return holder["model"]
