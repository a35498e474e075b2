"""Training side of the spatialsift toolkit.

Fits the target-speech sifting network on feature exports produced by the
inference package's CLI, trains the speaker encoder with the generalized
end-to-end loss, and writes every artifact in the shared named-tensor
container format. Talks to the inference package exclusively through
files: datasets, feature exports, weight containers, and embeddings.
"""

__version__ = "0.1.0"

from .model import SiftingNetwork, export_weights, load_into_model, masked_magnitude_loss
from .encoder import SpeakerEncoder, Ge2eLoss, export_encoder, export_dvector, embed
from .training import train_crn, train_encoder, overfit_single_clip
from .container import read_container, write_container
