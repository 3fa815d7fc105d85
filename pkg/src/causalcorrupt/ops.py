"""Deterministic raster corruption operators.

All operators are pure functions of (image, parameters, noise_seed) on
float64 RGB arrays with values in [0, 1]. Identity parameters return the
input bit-exactly; every output is clamped back to [0, 1]. Stochastic
operators (noise, clouds) draw from a Generator seeded only by the given
noise_seed, never from global state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from .errors import ArityError, OperatorDomainError, ShapeMismatchError, UnknownOperatorError
from .rng import generator_for  # noqa: F401  (re-exported for callers deriving noise seeds)

logger = logging.getLogger(__name__)

PSNR_CAP_DB = 100.0

# Blur sigma at or below this is the benign no-op setting.
BLUR_IDENTITY_SIGMA = 1.0
_BLUR_NOOP_TOL = 1e-9

# Defocus blur radius below half a pixel cannot move any mass.
_DEFOCUS_NOOP_RADIUS = 0.5


@dataclass(frozen=True)
class ParamSpec:
    """Declared domain and identity setting for one operator parameter."""

    name: str
    lo: float
    hi: float
    identity: float


@dataclass(frozen=True)
class OperatorInfo:
    op_id: str
    params: tuple[ParamSpec, ...]
    stochastic: bool = False

    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)


# Domain bounds are wide enough that clamping is a sub-percent tail event
# for every shipped parameter distribution.
OPERATORS: dict[str, OperatorInfo] = {
    "gamma": OperatorInfo("gamma", (ParamSpec("gamma", 1.0, 10.0, 1.0),)),
    "blur": OperatorInfo("blur", (ParamSpec("sigma", 0.0, 32.0, BLUR_IDENTITY_SIGMA),)),
    "defocus": OperatorInfo(
        "defocus",
        (ParamSpec("z", 1.0, 10.0, 1.0), ParamSpec("f_stop", 64.0, 128.0, 128.0)),
    ),
    "lens": OperatorInfo(
        "lens",
        (ParamSpec("distort", 0.0, 1.0, 0.0), ParamSpec("disperse", 0.0, 2.0, 0.0)),
    ),
    "motion": OperatorInfo(
        "motion",
        (ParamSpec("distance", 0.0, 0.5, 0.0), ParamSpec("zoom", 0.0, 1.0, 0.0)),
    ),
    "noise": OperatorInfo("noise", (ParamSpec("scale", 0.0, 1.0, 0.0),), stochastic=True),
    "clouds": OperatorInfo("clouds", (ParamSpec("factor", 0.0, 1.0, 0.0),), stochastic=True),
    "glare": OperatorInfo("glare", (ParamSpec("mix", -0.5, 0.5, -0.5),)),
    "clean": OperatorInfo("clean", ()),
}

_MOTION_LINEAR_TAPS = 16
_MOTION_ZOOM_TAPS = 8
_GLARE_THRESHOLD = 0.8
_CLOUD_OCTAVES = 4
_CLOUD_PERSISTENCE = 0.5


def operator_info(op_id: str) -> OperatorInfo:
    try:
        return OPERATORS[op_id]
    except KeyError:
        raise UnknownOperatorError(f"unknown operator {op_id!r}") from None


def clamp_params(op_id: str, params: dict[str, float]) -> dict[str, float]:
    """Validate parameter names against the operator and clamp to domains.

    Out-of-domain values are clamped with a logged diagnostic rather than
    rejected; NaN parameters are rejected outright.
    """
    info = operator_info(op_id)
    expected = set(info.param_names())
    got = set(params)
    if got != expected:
        raise ArityError(
            f"operator {op_id!r} takes parameters {sorted(expected)}, got {sorted(got)}"
        )
    out: dict[str, float] = {}
    for spec in info.params:
        v = float(params[spec.name])
        if math.isnan(v):
            raise OperatorDomainError(f"{op_id}.{spec.name} is NaN")
        cv = min(max(v, spec.lo), spec.hi)
        if cv != v:
            logger.warning("clamped %s.%s from %r to %r", op_id, spec.name, v, cv)
        out[spec.name] = cv
    return out


def identity_params(op_id: str) -> dict[str, float]:
    return {p.name: p.identity for p in operator_info(op_id).params}


def is_identity(op_id: str, params: dict[str, float]) -> bool:
    """True when the operator cannot change any pixel at these parameters."""
    p = params
    if op_id == "gamma":
        return p["gamma"] == 1.0
    if op_id == "blur":
        return p["sigma"] <= BLUR_IDENTITY_SIGMA + _BLUR_NOOP_TOL
    if op_id == "defocus":
        return _defocus_radius(p["z"], p["f_stop"]) < _DEFOCUS_NOOP_RADIUS
    if op_id == "lens":
        return p["distort"] == 0.0
    if op_id == "motion":
        return p["distance"] == 0.0 and p["zoom"] == 0.0
    if op_id == "noise":
        return p["scale"] == 0.0
    if op_id == "clouds":
        return p["factor"] == 0.0
    if op_id == "glare":
        return p["mix"] + 0.5 == 0.0
    if op_id == "clean":
        return True
    raise UnknownOperatorError(f"unknown operator {op_id!r}")


def _check_image(image: np.ndarray) -> np.ndarray:
    if not isinstance(image, np.ndarray):
        raise ShapeMismatchError(f"image must be an ndarray, got {type(image).__name__}")
    if image.ndim != 3 or image.shape[2] != 3:
        raise ShapeMismatchError(f"image must have shape (H, W, 3), got {image.shape}")
    return np.ascontiguousarray(image, dtype=np.float64)


def apply(op_id: str, image: np.ndarray, params: dict[str, float], noise_seed: int = 0) -> np.ndarray:
    """Apply one corruption operator and return a new image array.

    Args:
        op_id: operator identifier from OPERATORS.
        image: (H, W, 3) float array with values in [0, 1].
        params: raw parameter values; clamped to the declared domains.
        noise_seed: seed for stochastic operators; ignored by the rest.

    Returns:
        New float64 array in [0, 1] with the same shape as image.
    """
    img = _check_image(image)
    p = clamp_params(op_id, params)
    if is_identity(op_id, p):
        return img.copy()
    if op_id == "gamma":
        out = np.power(img, p["gamma"])
    elif op_id == "blur":
        out = _gaussian_blur(img, p["sigma"])
    elif op_id == "defocus":
        out = _defocus(img, p["z"], p["f_stop"])
    elif op_id == "lens":
        out = _lens(img, p["distort"], p["disperse"])
    elif op_id == "motion":
        out = _motion(img, p["distance"], p["zoom"])
    elif op_id == "noise":
        rng = np.random.Generator(np.random.PCG64(noise_seed))
        out = img + rng.normal(0.0, p["scale"], size=img.shape)
    elif op_id == "clouds":
        rng = np.random.Generator(np.random.PCG64(noise_seed))
        n = value_noise(img.shape[0], img.shape[1], rng)[:, :, None]
        out = img * (1.0 - p["factor"] * n) + p["factor"] * n
    elif op_id == "glare":
        out = _glare(img, p["mix"])
    else:
        # clean is always identity and returns above
        raise UnknownOperatorError(f"unknown operator {op_id!r}")
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# kernels and geometry helpers


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian taps truncated at radius ceil(3 * sigma)."""
    if sigma <= 0:
        raise OperatorDomainError(f"gaussian kernel requires sigma > 0, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    k = gaussian_kernel1d(sigma)
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        tmp = ndimage.correlate1d(img[:, :, c], k, axis=0, mode="reflect")
        out[:, :, c] = ndimage.correlate1d(tmp, k, axis=1, mode="reflect")
    return out


def _defocus_radius(z: float, f_stop: float) -> float:
    return 1.5 * (z - 1.0) * (128.0 / f_stop)


def disc_kernel(radius: float) -> np.ndarray:
    """Normalized disc with per-pixel coverage weights at the rim."""
    r = int(math.ceil(radius))
    ys, xs = np.mgrid[-r : r + 1, -r : r + 1]
    d = np.hypot(xs, ys)
    w = np.clip(radius + 0.5 - d, 0.0, 1.0)
    return w / w.sum()


def _convolve2d_reflect(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    ry = kernel.shape[0] // 2
    rx = kernel.shape[1] // 2
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        padded = np.pad(img[:, :, c], ((ry, ry), (rx, rx)), mode="symmetric")
        out[:, :, c] = signal.fftconvolve(padded, kernel, mode="valid")
    return out


def _defocus(img: np.ndarray, z: float, f_stop: float) -> np.ndarray:
    radius = _defocus_radius(z, f_stop)
    return _convolve2d_reflect(img, disc_kernel(radius))


def _gather_rows(img: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear resample along axis 0 at fractional row coordinates ys."""
    h = img.shape[0]
    y0 = np.floor(ys).astype(np.int64)
    t = (ys - y0)[:, None, None] if img.ndim == 3 else (ys - y0)[:, None]
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    return img[y0c] * (1.0 - t) + img[y1c] * t


def _gather_cols(img: np.ndarray, xs: np.ndarray) -> np.ndarray:
    w = img.shape[1]
    x0 = np.floor(xs).astype(np.int64)
    t = (xs - x0)[None, :, None] if img.ndim == 3 else (xs - x0)[None, :]
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    return img[:, x0c] * (1.0 - t) + img[:, x1c] * t


def _motion(img: np.ndarray, distance: float, zoom: float) -> np.ndarray:
    h, w = img.shape[:2]
    out = img
    if distance > 0.0:
        span = distance * w
        offsets = np.linspace(-span / 2.0, span / 2.0, _MOTION_LINEAR_TAPS)
        acc = np.zeros_like(img)
        base = np.arange(w, dtype=np.float64)
        for dx in offsets:
            acc += _gather_cols(img, base + dx)
        out = acc / _MOTION_LINEAR_TAPS
    if zoom > 0.0:
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        rows = np.arange(h, dtype=np.float64)
        cols = np.arange(w, dtype=np.float64)
        acc = np.zeros_like(out)
        for s in np.linspace(1.0, 1.0 + zoom, _MOTION_ZOOM_TAPS):
            ys = cy + (rows - cy) / s
            xs = cx + (cols - cx) / s
            acc += _gather_cols(_gather_rows(out, ys), xs)
        out = acc / _MOTION_ZOOM_TAPS
    return out


def _bilinear(channel: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    h, w = channel.shape
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    ty = ys - y0
    tx = xs - x0
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    top = channel[y0c, x0c] * (1.0 - tx) + channel[y0c, x1c] * tx
    bot = channel[y1c, x0c] * (1.0 - tx) + channel[y1c, x1c] * tx
    return top * (1.0 - ty) + bot * ty


def _lens(img: np.ndarray, distort: float, disperse: float) -> np.ndarray:
    h, w = img.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    half_diag = math.hypot(cy, cx)
    if half_diag == 0.0:
        return img.copy()
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    ny = (ys - cy) / half_diag
    nx = (xs - cx) / half_diag
    r2 = nx * nx + ny * ny
    # Red and blue sample with perturbed coefficients; green with the base one.
    coeffs = (
        distort * (1.0 + 0.5 * disperse),
        distort,
        distort * (1.0 - 0.5 * disperse),
    )
    out = np.empty_like(img)
    for c, k in enumerate(coeffs):
        scale = 1.0 + k * r2
        out[:, :, c] = _bilinear(img[:, :, c], cy + ny * scale * half_diag, cx + nx * scale * half_diag)
    return out


def _glare(img: np.ndarray, mix: float) -> np.ndarray:
    weight = mix + 0.5
    bright = np.clip(img - _GLARE_THRESHOLD, 0.0, None)
    glow = _gaussian_blur(bright, img.shape[1] / 32.0)
    return img + weight * glow


def value_noise(
    height: int,
    width: int,
    rng: np.random.Generator,
    octaves: int = _CLOUD_OCTAVES,
    persistence: float = _CLOUD_PERSISTENCE,
    base_period: float | None = None,
) -> np.ndarray:
    """Fractal value noise in [0, 1].

    Random lattice values per octave are interpolated with a smoothstep
    fade; octave o runs at period base_period / 2**o and amplitude
    persistence**o. The default base period is a quarter of the width.
    """
    if base_period is None:
        base_period = width / 4.0
    total = np.zeros((height, width), dtype=np.float64)
    norm = 0.0
    amp = 1.0
    for octave in range(octaves):
        period = base_period / (2.0**octave)
        gh = int(math.ceil(height / period)) + 2
        gw = int(math.ceil(width / period)) + 2
        lattice = rng.random((gh, gw))
        ys = np.arange(height, dtype=np.float64) / period
        xs = np.arange(width, dtype=np.float64) / period
        y0 = np.floor(ys).astype(np.int64)
        x0 = np.floor(xs).astype(np.int64)
        ty = _fade(ys - y0)[:, None]
        tx = _fade(xs - x0)[None, :]
        v00 = lattice[np.ix_(y0, x0)]
        v01 = lattice[np.ix_(y0, x0 + 1)]
        v10 = lattice[np.ix_(y0 + 1, x0)]
        v11 = lattice[np.ix_(y0 + 1, x0 + 1)]
        top = v00 * (1.0 - tx) + v01 * tx
        bot = v10 * (1.0 - tx) + v11 * tx
        total += amp * (top * (1.0 - ty) + bot * ty)
        norm += amp
        amp *= persistence
    return total / norm


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


# ---------------------------------------------------------------------------
# similarity and severity


def mse(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(d * d))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for unit-range data, capped at 100."""
    err = mse(a, b)
    if err == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, -10.0 * math.log10(err))


@dataclass(frozen=True)
class Severity:
    """One sample's raw parameters and its [0, 1] normalized severity."""

    operator_id: str
    raw: dict[str, float]
    normalized: float


def param_ranges(op_id: str, samples: list[dict[str, float]]) -> dict[str, tuple[float, float]]:
    """Observed (min, max) per parameter over a sample set."""
    info = operator_info(op_id)
    if not samples:
        return {p.name: (p.identity, p.identity) for p in info.params}
    out = {}
    for p in info.params:
        vals = [float(s[p.name]) for s in samples]
        out[p.name] = (min(vals), max(vals))
    return out


def normalize_severity(
    op_id: str, raw: dict[str, float], ranges: dict[str, tuple[float, float]]
) -> float:
    """Min-max severity in [0, 1]; multi-parameter operators average per-parameter values."""
    info = operator_info(op_id)
    if not info.params:
        return 0.0
    parts = []
    for p in info.params:
        lo, hi = ranges[p.name]
        if hi <= lo:
            parts.append(0.0)
        else:
            v = min(max(float(raw[p.name]), lo), hi)
            parts.append((v - lo) / (hi - lo))
    return float(sum(parts) / len(parts))


def severity_normalize(
    op_id: str, params: dict[str, float], observed_range: dict[str, tuple[float, float]]
) -> Severity:
    """Severity of one parameter sample against observed per-parameter ranges."""
    return Severity(
        operator_id=op_id,
        raw={k: float(v) for k, v in params.items()},
        normalized=normalize_severity(op_id, params, observed_range),
    )


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Image similarity in dB (PSNR on unit-range data); higher is closer."""
    return psnr(a, b)
