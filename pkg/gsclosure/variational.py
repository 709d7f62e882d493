"""Numerics of the residual variational inference of partial surfaces.

Candidate features `F` (an M x C matrix) receive a residual `alpha * F_v`;
the residual comes from a Gaussian posterior `N(mu, sigma^2)` sampled by
reparameterization. Its evidence lower bound is evaluated as a minimized
loss

    recon = (1/M) sum_i |F_i - R_i|^2
    kl    = -(1/2M) sum_ij (1 + log sigma_ij^2 - mu_ij^2 - sigma_ij^2)
    loss  = recon + kl

so that the ELBO itself is `-loss`.
"""
import io
import struct
import logging
from collections import namedtuple

import numpy as np

from sklearn.utils import check_array, check_random_state

from .exceptions import ShapeMismatchError, NumericDomainError, SchemaError
from .utils import atomic_write

logger = logging.getLogger(__name__)


DEFAULT_ALPHA = 0.1

# header of the binary matrix format: u32 rows, u32 columns
MATRIX_HEADER = struct.Struct("<II")


class ElboTerms(namedtuple("ElboTerms", ["recon", "kl", "loss"])):
    """Reconstruction and KL terms of the minimized ELBO loss."""
    __slots__ = ()

    @property
    def elbo(self):
        return -self.loss

    def to_dict(self):
        return dict(self._asdict(), elbo=self.elbo)


ElboGradients = namedtuple("ElboGradients", [
    "d_mu", "d_sigma", "d_reconstruction"])


def check_matrix(X, name="X"):
    """A finite float64 matrix, or `ShapeMismatchError`."""
    try:
        return check_array(X, dtype=np.float64, ensure_2d=True, copy=False)
    except ValueError as err:
        raise ShapeMismatchError("""`%s` must be a finite 2D matrix: %s"""
                                 % (name, err))


def _check_conforming(**matrices):
    checked = {name: check_matrix(X, name) for name, X in matrices.items()}
    shapes = {X.shape for X in checked.values()}
    if len(shapes) > 1:
        raise ShapeMismatchError(
            """Matrices must share one shape, got %s.""" % ", ".join(
                "%s%r" % (name, X.shape)
                for name, X in sorted(checked.items())))
    return checked


def _check_sigma(sigma):
    if np.any(sigma <= 0):
        raise NumericDomainError("""`sigma` must be positive everywhere.""")
    return sigma


def inject_residual(features, residual, alpha=DEFAULT_ALPHA):
    """Return `features + alpha * residual` as a new matrix."""
    m = _check_conforming(features=features, residual=residual)
    return m["features"] + alpha * m["residual"]


def reparameterize(mu, sigma, eps):
    """Reparameterized sample `mu + sigma * eps`.

    Scalars and vectors are taken as one-row matrices; three scalars give a
    float.
    """
    scalar = all(np.ndim(v) == 0 for v in (mu, sigma, eps))
    m = _check_conforming(mu=np.atleast_2d(mu), sigma=np.atleast_2d(sigma),
                          eps=np.atleast_2d(eps))
    sample = m["mu"] + _check_sigma(m["sigma"]) * m["eps"]
    return float(sample[0, 0]) if scalar else sample


def elbo_terms(features, reconstruction, mu, sigma):
    """The reconstruction and KL terms of the loss.

    Parameters
    ----------
    features, reconstruction, mu, sigma : array-like, shape (M, C)
        `sigma` must be positive; it is never clamped.

    Returns
    -------
    terms : ElboTerms
    """
    m = _check_conforming(features=features, reconstruction=reconstruction,
                          mu=mu, sigma=sigma)
    F, R, mu, sigma = m["features"], m["reconstruction"], m["mu"], m["sigma"]
    _check_sigma(sigma)

    n_rows = F.shape[0]
    recon = np.sum((F - R) ** 2) / n_rows

    sigma2 = sigma * sigma
    # the KL of each entry is nonnegative; summing them keeps kl >= 0 exactly
    kl_entries = 0.5 * (sigma2 - 1. - np.log(sigma2) + mu * mu)
    kl = max(0., np.sum(kl_entries)) / n_rows

    return ElboTerms(float(recon), float(kl), float(recon + kl))


def elbo_gradients(features, reconstruction, mu, sigma):
    """Analytic gradients of the loss.

    Returns
    -------
    gradients : ElboGradients
        `mu / M`, `(sigma - 1 / sigma) / M` and `-2 (F - R) / M`.
    """
    m = _check_conforming(features=features, reconstruction=reconstruction,
                          mu=mu, sigma=sigma)
    F, R, mu, sigma = m["features"], m["reconstruction"], m["mu"], m["sigma"]
    _check_sigma(sigma)

    n_rows = F.shape[0]
    return ElboGradients(mu / n_rows, (sigma - 1. / sigma) / n_rows,
                         -2. * (F - R) / n_rows)


class ResidualELBO(object):
    """The residual ELBO loss as an objective with cached gradients.

    Parameters
    ----------
    features : array-like, shape (M, C)
        Candidate features the decoder should reconstruct.

    alpha : float (default=0.1)
        Residual weight.

    deterministic : bool (default=False)
        Use the posterior mean instead of a reparameterized sample, which
        switches the stochastic part of the residual off.

    random_state : int, RandomState instance or None
    """

    def __init__(self, features, alpha=DEFAULT_ALPHA, deterministic=False,
                 random_state=None):
        self.features = check_matrix(features, "features")
        self.alpha = alpha
        self.deterministic = deterministic
        self.random_state = check_random_state(random_state)

    def sample(self, mu, sigma):
        """A residual from the posterior `N(mu, sigma^2)`."""
        mu, sigma = check_matrix(mu, "mu"), check_matrix(sigma, "sigma")
        if self.deterministic:
            return mu.copy()

        eps = self.random_state.normal(size=mu.shape)
        return reparameterize(mu, sigma, eps)

    def inject(self, residual):
        return inject_residual(self.features, residual, self.alpha)

    def update(self, mu, sigma, reconstruction):
        """Evaluate at a new point."""
        return self.forward(mu, sigma, reconstruction).backward()

    def forward(self, mu, sigma, reconstruction):
        self.mu, self.sigma = mu, sigma
        self.reconstruction = reconstruction
        self.terms = elbo_terms(self.features, reconstruction, mu, sigma)
        return self

    def backward(self):
        self.gradients = elbo_gradients(self.features, self.reconstruction,
                                        self.mu, self.sigma)
        return self

    def value(self):
        """The current loss, `-ELBO`."""
        return self.terms.loss

    def grad(self):
        if not hasattr(self, "gradients"):
            raise RuntimeError("""Gradient requested before `backward()`.""")
        return self.gradients


def total_loss(res_loss, pred_loss=0., refine_loss=0., lambda_res=1.,
               lambda_pred=1., lambda_refine=1.):
    """Weighted training loss `l_pred L_pred + l_ref L_ref + l_res L_res`.

    `res_loss` is the minimized residual loss (`-ELBO`), either a float or
    `ElboTerms`.
    """
    if isinstance(res_loss, ElboTerms):
        res_loss = res_loss.loss

    weights = (lambda_res, lambda_pred, lambda_refine)
    if any(w < 0 for w in weights):
        raise NumericDomainError("""Loss weights must be nonnegative.""")

    return lambda_pred * pred_loss + lambda_refine * refine_loss \
        + lambda_res * res_loss


def matrix_to_csv(X):
    """Dense row-major CSV without a header; floats in `repr` precision."""
    X = check_matrix(X)
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in X)


def matrix_from_csv(text):
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise SchemaError("""A matrix CSV needs at least one row.""")

    try:
        X = np.loadtxt(io.StringIO("\n".join(rows)), delimiter=",",
                       dtype=np.float64, ndmin=2)
    except ValueError as err:
        raise SchemaError("""Bad matrix CSV: %s""" % err)

    return check_matrix(X)


def matrix_to_bytes(X):
    """`u32 M, u32 C` then `M * C` little-endian float64, row-major."""
    X = check_matrix(X)
    return MATRIX_HEADER.pack(*X.shape) + X.astype("<f8").tobytes(order="C")


def matrix_from_bytes(data):
    if len(data) < MATRIX_HEADER.size:
        raise SchemaError("""Binary matrix shorter than its header.""")

    n_rows, n_cols = MATRIX_HEADER.unpack_from(data)
    expected = MATRIX_HEADER.size + 8 * n_rows * n_cols
    if len(data) != expected:
        raise SchemaError("""Binary matrix of shape (%d, %d) needs %d """
                          """bytes, got %d.""" % (n_rows, n_cols, expected,
                                                  len(data)))

    X = np.frombuffer(data, dtype="<f8", offset=MATRIX_HEADER.size)
    return check_matrix(X.reshape(n_rows, n_cols).astype(np.float64))


def load_matrix(path):
    """Read a `.csv` or binary matrix file."""
    if path.endswith(".csv"):
        with open(path, "r") as f:
            return matrix_from_csv(f.read())

    with open(path, "rb") as f:
        return matrix_from_bytes(f.read())


def save_matrix(X, path):
    """Write a matrix atomically, as CSV for `.csv` paths, else binary."""
    data = matrix_to_csv(X) if path.endswith(".csv") else matrix_to_bytes(X)
    atomic_write(path, data)
    logger.debug("wrote %r matrix to %s", np.shape(X), path)
