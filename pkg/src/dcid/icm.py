"""Informativeness, compactness and minimality of a shared-signal estimate."""
from dataclasses import asdict, dataclass

import numpy as np

from dcid.regression import as_matrix, r_squared


@dataclass(frozen=True)
class IcmScore:
    informativeness: float
    compactness: float
    minimality: float
    icm: float
    n_components: int

    @classmethod
    def empty(cls):
        return cls(0.0, 0.0, 0.0, 0.0, 0)

    def as_dict(self):
        return asdict(self)


def informativeness(z_hat, z, **probe):
    """How well the estimate linearly predicts the true shared latents."""
    return r_squared(z_hat, z, **probe)


def compactness(z, z_hat, **probe):
    """How well the true shared latents linearly predict every estimate column."""
    return r_squared(z, z_hat, **probe)


def minimality(z_hat, z1, z2, **probe):
    """One minus the individual-latent signal recoverable from the estimate."""
    return 1.0 - r_squared(z_hat, np.hstack([as_matrix(z1), as_matrix(z2)]), **probe)


def icm_from_latents(z_hat, z, z1, z2, **probe):
    z_hat = as_matrix(z_hat, "z_hat")
    if z_hat.shape[1] == 0:
        return IcmScore.empty()
    if not np.all(np.isfinite(z_hat)):
        raise ValueError("z_hat has non-finite entries")
    i = informativeness(z_hat, z, **probe)
    c = compactness(z, z_hat, **probe)
    m = minimality(z_hat, z1, z2, **probe)
    return IcmScore(i, c, m, i * c * m, z_hat.shape[1])


def score_icm(z_hat, dataset, **probe):
    """ICM of ``z_hat`` against ``dataset``'s latents on the test split.

    ``z_hat`` may hold either one row per test row or one row per dataset
    row (the test rows are then selected). An estimate with no columns
    scores zero everywhere.
    """
    z_hat = as_matrix(z_hat, "z_hat")
    test = dataset.indices("test")
    if z_hat.shape[0] == dataset.n_rows:
        z_hat = z_hat[test]
    elif z_hat.shape[0] != test.size:
        raise ValueError(
            f"z_hat has {z_hat.shape[0]} rows; expected {test.size} (test split) or {dataset.n_rows} (all rows)"
        )
    return icm_from_latents(z_hat, dataset.z[test], dataset.z1[test], dataset.z2[test], **probe)
