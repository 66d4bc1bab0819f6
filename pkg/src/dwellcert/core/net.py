"""Small dense feed-forward networks on numpy.

A network with L layers computes

    a_0 = x,  a_k = phi(W_k a_{k-1} + b_k)  (k < L),  out = W_L a_{L-1} + b_L

with a twice differentiable activation phi whose slope lies in [0, s] and
whose second derivative is bounded by s2. Gradients with respect to the
input and to the parameters are computed exactly by reverse mode.

Certified Lipschitz bounds
--------------------------
With sigma_k = ||W_k||_2 (power iteration):

    L_fn  = s^(L-1) * prod_k sigma_k

and, for scalar outputs, the gradient x -> grad net(x) is Lipschitz with

    L_jac = sum_{k=1}^{L-1} s2 * s^(L+k-3) * prod_{j>k} sigma_j
                               * (prod_{j<=k} sigma_j)^2

The k-th term bounds the change of the product W_L D_{L-1} ... D_1 W_1
when only the diagonal activation-slope matrix D_k moves: |D_k(z) - D_k(z')|
<= s2 |z - z'| and z_k is s^(k-1) prod_{j<=k} sigma_j Lipschitz in x. Both
bounds are sound for any parameters.
"""

from __future__ import annotations

import logging
import math
import typing
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import Activation
from .errors import LooseCertificateWarning, ValidationError

if typing.TYPE_CHECKING:
    from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

    from .constants import ActivationValue, FloatArray

    ParamArrays = List[FloatArray]
    """[W_1, b_1, ..., W_L, b_L]"""

logger = logging.getLogger(__name__)

POWER_ITERATIONS = 200
POWER_RTOL = 1e-10
POWER_SLACK = 1e-7
"""Relative inflation of a converged power-iteration estimate, which
approaches the spectral norm from below."""

SLOPE_BOUND = {
    Activation.TANH: 1.0,
    Activation.SOFTPLUS: 1.0,
    Activation.SIGMOID: 0.25,
}
"""sup |phi'| of each activation"""

CURVATURE_BOUND = {
    Activation.TANH: 4.0 / (3.0 * math.sqrt(3.0)),
    Activation.SOFTPLUS: 0.25,
    Activation.SIGMOID: 1.0 / (6.0 * math.sqrt(3.0)),
}
"""sup |phi''| of each activation"""


def _sigmoid(z: FloatArray) -> FloatArray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def activate(activation: Activation, z: FloatArray) -> FloatArray:
    if activation == Activation.TANH:
        return np.tanh(z)
    if activation == Activation.SOFTPLUS:
        return np.logaddexp(0.0, z)
    return _sigmoid(z)


def activation_slope(activation: Activation, z: FloatArray) -> FloatArray:
    """phi'(z)"""
    if activation == Activation.TANH:
        return 1.0 - np.tanh(z) ** 2
    if activation == Activation.SOFTPLUS:
        return _sigmoid(z)
    sig = _sigmoid(z)
    return sig * (1.0 - sig)


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Weights and biases of a dense network. ``weights[k]`` has shape
    (out_k, in_k); the last layer is affine."""

    weights: Tuple[FloatArray, ...]
    biases: Tuple[FloatArray, ...]
    activation: Activation = Activation.TANH

    def __post_init__(self) -> None:
        weights = tuple(np.array(w, dtype=float) for w in self.weights)
        biases = tuple(np.array(b, dtype=float).reshape(-1) for b in self.biases)
        if not weights or len(weights) != len(biases):
            raise ValidationError(
                "a network needs at least one layer and one bias per layer "
                f"(got {len(weights)} weights and {len(biases)} biases)"
            )
        for k, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or w.shape[0] != b.size:
                raise ValidationError(
                    f"layer {k}: weight shape {w.shape} does not match bias "
                    f"length {b.size}"
                )
            if k and w.shape[1] != weights[k - 1].shape[0]:
                raise ValidationError(
                    f"layer {k}: expects {w.shape[1]} inputs but layer {k - 1} "
                    f"has {weights[k - 1].shape[0]} outputs"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValidationError(f"layer {k}: parameters must be finite")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(
            self, "activation", Activation.parse(self.activation, "activation")
        )

    @property
    def sizes(self) -> List[int]:
        return [int(self.weights[0].shape[1])] + [int(w.shape[0]) for w in self.weights]

    @property
    def input_dim(self) -> int:
        return int(self.weights[0].shape[1])

    @property
    def output_dim(self) -> int:
        return int(self.weights[-1].shape[0])

    @property
    def depth(self) -> int:
        """Number of affine layers L."""
        return len(self.weights)

    def arrays(self) -> ParamArrays:
        out: ParamArrays = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def with_arrays(self, arrays: Sequence[FloatArray]) -> MlpParams:
        """New parameters of the same architecture from [W_1, b_1, ...]."""
        return MlpParams(tuple(arrays[0::2]), tuple(arrays[1::2]), self.activation)

    def with_output_bias(self, bias: FloatArray) -> MlpParams:
        arrays = self.arrays()
        arrays[-1] = np.asarray(bias, dtype=float)
        return self.with_arrays(arrays)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sizes": self.sizes,
            "activation": str(self.activation),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> MlpParams:
        params = cls(
            tuple(_matrix(w) for w in data["weights"]),
            tuple(np.array(b, dtype=float) for b in data["biases"]),
            data["activation"],
        )
        if params.sizes != list(data["sizes"]):
            raise ValidationError(
                f"layer sizes {params.sizes} do not match the recorded sizes "
                f"{data['sizes']}"
            )
        return params

    def __repr__(self) -> str:
        sizes = "-".join(str(s) for s in self.sizes)
        return f"MlpParams({sizes}, {self.activation})"


def _matrix(rows: Any) -> FloatArray:
    arr = np.array(rows, dtype=float)
    return arr.reshape(len(rows), -1)


@dataclass
class ForwardPass:
    """Intermediate values of one batched forward pass."""

    activations: List[FloatArray]
    """a_0 (the input) ... a_{L-1}, each (B, size)"""
    preactivations: List[FloatArray]
    """z_1 ... z_{L-1} of the hidden layers"""
    output: FloatArray
    """(B, out)"""


def _as_batch(params: MlpParams, x: FloatArray) -> Tuple[FloatArray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    batch = arr.reshape(1, -1) if single else arr
    if batch.ndim != 2 or batch.shape[1] != params.input_dim:
        raise ValidationError(
            f"network expects inputs of dimension {params.input_dim} "
            f"(got shape {arr.shape})"
        )
    return batch, single


def run_forward(params: MlpParams, batch: FloatArray) -> ForwardPass:
    a = batch
    activations = [a]
    preactivations = []
    last = params.depth - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        if k == last:
            return ForwardPass(activations, preactivations, z)
        preactivations.append(z)
        a = activate(params.activation, z)
        activations.append(a)
    raise AssertionError("unreachable")  # pragma: no cover


def forward(params: MlpParams, x: FloatArray) -> FloatArray:
    """Network output. A single input (n,) gives (out,); a batch (B, n) gives
    (B, out)."""
    batch, single = _as_batch(params, x)
    out = run_forward(params, batch).output
    return out[0] if single else out


def input_gradient(params: MlpParams, x: FloatArray) -> FloatArray:
    """d out / d input of a scalar-output network, same shape as ``x``."""
    if params.output_dim != 1:
        raise ValidationError(
            f"input_gradient needs a scalar output (got {params.output_dim} outputs)"
        )
    batch, single = _as_batch(params, x)
    fp = run_forward(params, batch)
    g = np.repeat(params.weights[-1], batch.shape[0], axis=0)
    for k in range(params.depth - 2, -1, -1):
        slope = activation_slope(params.activation, fp.preactivations[k])
        g = (g * slope) @ params.weights[k]
    return g[0] if single else g


def param_gradients(
    params: MlpParams,
    x: FloatArray,
    adjoint: Union[float, FloatArray],
    fp: Optional[ForwardPass] = None,
) -> ParamArrays:
    """Gradients of sum_b <adjoint_b, out_b> with respect to every weight
    and bias, ordered like MlpParams.arrays().

    ``adjoint`` broadcasts against the (B, out) output, so a scalar, a (B,)
    vector (for scalar outputs) or a full (B, out) array all work.
    """
    batch, _ = _as_batch(params, x)
    if fp is None:
        fp = run_forward(params, batch)
    adj = np.asarray(adjoint, dtype=float)
    if adj.ndim == 1 and params.output_dim == 1 and adj.size == batch.shape[0]:
        adj = adj[:, None]
    delta = np.broadcast_to(adj, fp.output.shape)
    grads: ParamArrays = [np.empty(0)] * (2 * params.depth)
    for k in range(params.depth - 1, -1, -1):
        grads[2 * k] = delta.T @ fp.activations[k]
        grads[2 * k + 1] = delta.sum(axis=0)
        if k:
            slope = activation_slope(params.activation, fp.preactivations[k - 1])
            delta = (delta @ params.weights[k]) * slope
    return grads


@dataclass(frozen=True)
class SpectralNorm:
    value: float
    left: FloatArray
    """Leading left singular vector u"""
    right: FloatArray
    """Leading right singular vector v"""
    converged: bool
    """False means power iteration did not converge and ``value`` is the
    Frobenius norm."""

    def gradient(self, weight: FloatArray) -> FloatArray:
        """d value / d weight"""
        if self.value == 0.0:
            return np.zeros_like(weight)
        if self.converged:
            return np.outer(self.left, self.right) * (1.0 + POWER_SLACK)
        return weight / self.value


def spectral_norm(
    weight: FloatArray, iterations: int = POWER_ITERATIONS, rtol: float = POWER_RTOL
) -> SpectralNorm:
    """||W||_2 by power iteration on W^T W, started from a fixed seeded
    vector so results are reproducible.

    The iterates are lower bounds of ||W||_2, so a converged estimate is
    inflated by POWER_SLACK. It is an upper bound as long as the last
    iterate is within that relative distance of the norm, which holds
    unless the two leading singular values nearly coincide and ``rtol``
    stops the iteration early. Falls back to the Frobenius norm (always an
    upper bound) if the iteration does not converge."""
    weight = np.asarray(weight, dtype=float)
    rows, cols = weight.shape
    v = np.random.default_rng(0).standard_normal(cols)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iterations):
        wv = weight @ v
        sigma = float(np.linalg.norm(wv))
        if sigma == 0.0:
            return SpectralNorm(0.0, np.zeros(rows), np.zeros(cols), True)
        u = wv / sigma
        wtu = weight.T @ u
        v = wtu / np.linalg.norm(wtu)
        if abs(sigma - estimate) <= rtol * sigma:
            wv = weight @ v
            sigma = float(np.linalg.norm(wv))
            return SpectralNorm(sigma * (1.0 + POWER_SLACK), wv / sigma, v, True)
        estimate = sigma

    frobenius = float(np.linalg.norm(weight))
    logger.debug(
        "Power iteration did not converge for a %dx%d matrix; using the "
        "Frobenius norm %g",
        rows,
        cols,
        frobenius,
    )
    return SpectralNorm(frobenius, np.zeros(rows), np.zeros(cols), False)


@dataclass(frozen=True)
class LipschitzCertificate:
    L_fn: float
    """Lipschitz bound of the network function"""
    L_jac: Optional[float]
    """Lipschitz bound of the input gradient (scalar-output nets only)"""
    spectral_norms: Tuple[float, ...]
    loose: bool = False
    """True if some spectral norm fell back to the Frobenius norm."""
    method: str = "spectral-norm product"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "L_fn": self.L_fn,
            "L_jac": self.L_jac,
            "spectral_norms": list(self.spectral_norms),
            "loose": self.loose,
            "method": self.method,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> LipschitzCertificate:
        return cls(
            L_fn=float(data["L_fn"]),
            L_jac=None if data["L_jac"] is None else float(data["L_jac"]),
            spectral_norms=tuple(float(s) for s in data["spectral_norms"]),
            loose=bool(data["loose"]),
            method=str(data["method"]),
        )


def _jacobian_terms(
    depth: int, s: float, s2: float
) -> List[Tuple[float, List[int]]]:
    """The L_jac bound as a sum of monomials coef * prod_j sigma_j^e_j."""
    terms = []
    for k in range(1, depth):
        coef = s2 * s ** (depth + k - 3)
        exponents = [2 if j <= k else 1 for j in range(1, depth + 1)]
        terms.append((coef, exponents))
    return terms


def _monomial(coef: float, exponents: Sequence[int], sigmas: Sequence[float]) -> float:
    return coef * math.prod(sig**e for sig, e in zip(sigmas, exponents))


def _monomial_partial(
    coef: float, exponents: Sequence[int], sigmas: Sequence[float], i: int
) -> float:
    """d/d sigma_i of coef * prod_j sigma_j^e_j"""
    rest = math.prod(
        sig**e for j, (sig, e) in enumerate(zip(sigmas, exponents)) if j != i
    )
    return coef * exponents[i] * sigmas[i] ** (exponents[i] - 1) * rest


@dataclass(frozen=True)
class _Bounds:
    certificate: LipschitzCertificate
    norms: List[SpectralNorm]
    fn_terms: List[Tuple[float, List[int]]]
    jac_terms: List[Tuple[float, List[int]]]


def _bounds(params: MlpParams, jacobian: Optional[bool]) -> _Bounds:
    s = SLOPE_BOUND[params.activation]
    s2 = CURVATURE_BOUND[params.activation]
    depth = params.depth
    norms = [spectral_norm(w) for w in params.weights]
    sigmas = [norm.value for norm in norms]
    fn_terms = [(s ** (depth - 1), [1] * depth)]
    L_fn = _monomial(*fn_terms[0], sigmas)
    if jacobian is None:
        jacobian = params.output_dim == 1
    jac_terms = _jacobian_terms(depth, s, s2) if jacobian else []
    L_jac = sum(_monomial(c, e, sigmas) for c, e in jac_terms) if jacobian else None
    loose = not all(norm.converged for norm in norms)
    if loose:
        warnings.warn(
            f"Power iteration did not converge for {params!r}; the Lipschitz "
            "certificate uses Frobenius norms and is loose.",
            LooseCertificateWarning,
            stacklevel=3,
        )
    certificate = LipschitzCertificate(
        L_fn=float(L_fn),
        L_jac=None if L_jac is None else float(L_jac),
        spectral_norms=tuple(sigmas),
        loose=loose,
    )
    return _Bounds(certificate, norms, fn_terms, jac_terms)


def certify_lipschitz(
    params: MlpParams, jacobian: Optional[bool] = None
) -> LipschitzCertificate:
    """Sound Lipschitz bounds of the network and (for scalar outputs, or if
    ``jacobian`` is True) of its input gradient."""
    return _bounds(params, jacobian).certificate


def smooth_hinge(gap: float, beta: float = 0.01) -> Tuple[float, float]:
    """Value and derivative of a hinge that is zero for gap <= 0, quadratic
    on (0, beta] and linear beyond."""
    if gap <= 0:
        return 0.0, 0.0
    if gap <= beta:
        return gap * gap / (2 * beta), gap / beta
    return gap - beta / 2, 1.0


def lipschitz_penalty(
    certified: Sequence[Optional[float]],
    targets: Sequence[float],
    weights: Optional[Sequence[float]] = None,
) -> float:
    """sum_i weight_i * hinge(certified_i - target_i). Entries whose
    certified value is None are skipped. Zero iff every bound is within its
    target."""
    if weights is None:
        weights = [1.0] * len(targets)
    total = 0.0
    for value, target, weight in zip(certified, targets, weights):
        if target <= 0:
            raise ValidationError(f"Lipschitz targets must be positive (got {target})")
        if value is not None:
            total += weight * smooth_hinge(value - target)[0]
    return total


def lipschitz_penalty_gradients(
    params: MlpParams,
    fn_target: float,
    fn_weight: float,
    jac_target: Optional[float] = None,
    jac_weight: float = 0.0,
) -> Tuple[float, ParamArrays, LipschitzCertificate]:
    """Penalty of the certified bounds of ``params`` against the targets,
    its gradient (ordered like MlpParams.arrays()) and the certificate.

    The gradient flows through the spectral norms: d sigma / d W = u v^T.
    """
    bounds = _bounds(params, jac_target is not None)
    cert = bounds.certificate
    sigmas = list(cert.spectral_norms)
    d_sigma = np.zeros(params.depth)

    value = 0.0
    parts = [(cert.L_fn, fn_target, fn_weight, bounds.fn_terms)]
    if jac_target is not None and cert.L_jac is not None:
        parts.append((cert.L_jac, jac_target, jac_weight, bounds.jac_terms))
    for bound, target, weight, terms in parts:
        hinge, slope = smooth_hinge(bound - target)
        value += weight * hinge
        if slope == 0.0:
            continue
        for i in range(params.depth):
            partial = sum(_monomial_partial(c, e, sigmas, i) for c, e in terms)
            d_sigma[i] += weight * slope * partial

    grads: ParamArrays = []
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        grads.append(d_sigma[i] * bounds.norms[i].gradient(w))
        grads.append(np.zeros_like(b))
    return value, grads, cert


def init_mlp(
    sizes: Sequence[int],
    activation: Union[Activation, ActivationValue],
    rng: np.random.Generator,
    lipschitz_target: Optional[float] = None,
    bias_scale: float = 0.1,
) -> MlpParams:
    """Glorot-uniform initialization. With ``lipschitz_target``, every layer
    is shrunk so that the certified L_fn starts at or below the target."""
    act = Activation.parse(activation, "activation")
    depth = len(sizes) - 1
    budget = None
    if lipschitz_target is not None:
        s = SLOPE_BOUND[act]
        budget = (lipschitz_target / s ** (depth - 1)) ** (1.0 / depth)
    weights = []
    biases = []
    for k in range(depth):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        if budget is not None:
            sigma = spectral_norm(w).value
            if sigma > budget:
                w *= budget / sigma
        weights.append(w)
        last = k == depth - 1
        b = np.zeros(fan_out) if last else rng.uniform(-bias_scale, bias_scale, fan_out)
        biases.append(b)
    return MlpParams(tuple(weights), tuple(biases), act)
