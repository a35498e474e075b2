"""Feature-container datasets written by the inference package's CLI."""

from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

from .container import read_container


class FeatureClipDataset(Dataset):
    """One item per exported clip: (planes, noisy_mag, clean_mag, dvector)."""

    def __init__(self, feature_dir):
        self.paths = sorted(Path(feature_dir).glob("*.tnsr"))
        if not self.paths:
            raise FileNotFoundError(f"no feature containers under {feature_dir}")
        first, attrs = read_container(self.paths[0])
        self.input_planes = first["features"].shape[0]
        self.feature_kind = attrs.get("feature_kind", "")

    def __len__(self):
        return len(self.paths)

    def __getitem__(self, index):
        tensors, attrs = read_container(self.paths[index])
        dvector = tensors["dvector"].astype(np.float32)
        norm = np.linalg.norm(dvector)
        if norm > 0:
            dvector = dvector / norm
        return (
            torch.from_numpy(tensors["features"].astype(np.float32)),
            torch.from_numpy(tensors["noisy_mag"].astype(np.float32)),
            torch.from_numpy(tensors["clean_mag"].astype(np.float32)),
            torch.from_numpy(dvector),
        )


def collate_crop(batch):
    """Stack clips, cropping every tensor to the shortest frame count."""
    frames = min(item[0].shape[1] for item in batch)
    planes = torch.stack([item[0][:, :frames] for item in batch])
    noisy = torch.stack([item[1][:frames] for item in batch])
    clean = torch.stack([item[2][:frames] for item in batch])
    dvec = torch.stack([item[3] for item in batch])
    return planes, noisy, clean, dvec
