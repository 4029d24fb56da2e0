"""Inner SGDM loops, compiled and plain.

Every model kind gets two step functions with identical semantics: an
explicit-loop build that numba compiles when available, and a vectorized
numpy build.  Which one runs is decided per driver from the package
backend selection (see backend.py); results agree to roundoff but not
bit for bit, since summation order differs.

Label noise is pre-drawn in fixed chunks from a single generator, in
step order, so the consumed random sequence does not depend on chunk
size, backend, or stop step.  The per-step update is

    pi <- beta * pi - grad(w; labels_t)
    w  <- w + eta * pi
"""

import math

import numpy as np

from .backend import USE_NUMBA, jit_kernel
from .errors import ContractError

__all__ = ["SGDMDriver", "CHUNK_ROWS"]

CHUNK_ROWS = 16384
_CHUNK_BUDGET = 4_000_000  # max label elements held per chunk


# ---------------------------------------------------------------- uv ----

def _uv_steps(w, pi, m1y, lstride, pos, k, a, scale, n, eta, beta):
    for t in range(k):
        m1 = m1y[(pos + t) * lstride]
        s = 0.0
        for i in range(n):
            s += w[i] * w[n + i]
        c = a * s - scale * m1
        for i in range(n):
            pi[i] = beta * pi[i] - c * w[n + i]
        for i in range(n):
            pi[n + i] = beta * pi[n + i] - c * w[i]
        for i in range(2 * n):
            w[i] += eta * pi[i]


def _uv_steps_numpy(w, pi, m1y, lstride, pos, k, a, scale, n, eta, beta):
    for t in range(k):
        c = a * float(w[:n] @ w[n:]) - scale * m1y[(pos + t) * lstride]
        pi[:n] = beta * pi[:n] - c * w[n:]
        pi[n:] = beta * pi[n:] - c * w[:n]
        w += eta * pi


# ----------------------------------------------------------- sensing ----

def _sensing_steps(w, pi, ylab, lstride, pos, k, amats, coeff, d, eta, beta):
    P = amats.shape[0]
    dd = d * d
    bkl = np.empty((d, d))
    r = np.empty(P)
    g = np.zeros((d, d))
    for t in range(k):
        row = (pos + t) * lstride
        for kk in range(d):
            for l in range(d):
                acc = 0.0
                for m in range(d):
                    acc += w[l * d + m] * w[dd + kk * d + m]
                bkl[kk, l] = acc
        for p in range(P):
            acc = 0.0
            for kk in range(d):
                for l in range(d):
                    acc += amats[p, kk, l] * bkl[kk, l]
            r[p] = acc - ylab[row, p]
        for kk in range(d):
            for l in range(d):
                g[kk, l] = 0.0
        for p in range(P):
            rp = r[p]
            for kk in range(d):
                for l in range(d):
                    g[kk, l] += rp * amats[p, kk, l]
        for l in range(d):
            for m in range(d):
                acc = 0.0
                for kk in range(d):
                    acc += g[kk, l] * w[dd + kk * d + m]
                pi[l * d + m] = beta * pi[l * d + m] - coeff * acc
        for kk in range(d):
            for m in range(d):
                acc = 0.0
                for l in range(d):
                    acc += g[kk, l] * w[l * d + m]
                pi[dd + kk * d + m] = beta * pi[dd + kk * d + m] - coeff * acc
        for i in range(2 * dd):
            w[i] += eta * pi[i]


def _sensing_steps_numpy(w, pi, ylab, lstride, pos, k, amats, coeff, d, eta, beta):
    dd = d * d
    a2 = amats.reshape(amats.shape[0], dd)
    u = w[:dd].reshape(d, d)
    v = w[dd:].reshape(d, d)
    for t in range(k):
        r = a2 @ (v @ u.T).ravel() - ylab[(pos + t) * lstride]
        g = (r @ a2).reshape(d, d)
        pi[:dd] = beta * pi[:dd] - coeff * (g.T @ v).ravel()
        pi[dd:] = beta * pi[dd:] - coeff * (g @ u).ravel()
        w += eta * pi


# --------------------------------------------------------------- mlp ----

def _mlp_steps(w, pi, ylab, lstride, pos, k, x, act_id, scale, d_in, n, d_out, eta, beta):
    # backprop written with np.dot so the compiled build hits BLAS; the
    # batch dimension is far too wide for scalar loops to keep up
    P = x.shape[0]
    nu = d_out * n
    sp = scale / P
    dim = nu + n * d_in
    h1 = np.empty((P, n))
    dz = np.empty((P, n))
    for t in range(k):
        row = (pos + t) * lstride
        u = w[:nu].reshape(d_out, n)
        v = w[nu:].reshape(n, d_in)
        z = np.dot(x, v.T)
        for a in range(P):
            for i in range(n):
                zc = z[a, i]
                if act_id == 0:
                    h1[a, i] = zc
                    dz[a, i] = 1.0
                elif act_id == 1:
                    th = math.tanh(zc)
                    h1[a, i] = th
                    dz[a, i] = 1.0 - th * th
                else:
                    h1[a, i] = zc if zc > 0.0 else 0.0
                    dz[a, i] = 1.0 if zc > 0.0 else 0.0
        r = scale * np.dot(h1, u.T) - ylab[row]
        gu = np.dot(r.T, h1)
        qm = np.dot(r, u) * dz
        gv = np.dot(qm.T, x)
        for i in range(nu):
            pi[i] = beta * pi[i] - sp * gu[i // n, i % n]
        for i in range(n * d_in):
            pi[nu + i] = beta * pi[nu + i] - sp * gv[i // d_in, i % d_in]
        for i in range(dim):
            w[i] += eta * pi[i]


def _mlp_steps_numpy(w, pi, ylab, lstride, pos, k, x, act_id, scale, d_in, n, d_out, eta, beta):
    P = x.shape[0]
    nu = d_out * n
    sp = scale / P
    for t in range(k):
        u = w[:nu].reshape(d_out, n)
        v = w[nu:].reshape(n, d_in)
        z = x @ v.T
        if act_id == 0:
            h1 = z
            dz = np.ones_like(z)
        elif act_id == 1:
            h1 = np.tanh(z)
            dz = 1.0 - h1 * h1
        else:
            h1 = np.maximum(z, 0.0)
            dz = (z > 0.0).astype(np.float64)
        r = scale * (h1 @ u.T) - ylab[(pos + t) * lstride]
        gu = sp * (r.T @ h1)
        gv = sp * (((r @ u) * dz).T @ x)
        pi[:nu] = beta * pi[:nu] - gu.ravel()
        pi[nu:] = beta * pi[nu:] - gv.ravel()
        w += eta * pi


# ------------------------------------------------------------ linear ----

def _linear_steps(w, pi, ylab, lstride, pos, k, x, eta, beta):
    P = x.shape[0]
    d = x.shape[1]
    r = np.empty(P)
    for t in range(k):
        row = (pos + t) * lstride
        for a in range(P):
            acc = 0.0
            for c in range(d):
                acc += x[a, c] * w[c]
            r[a] = acc - ylab[row, a]
        for c in range(d):
            acc = 0.0
            for a in range(P):
                acc += x[a, c] * r[a]
            pi[c] = beta * pi[c] - acc / P
        for c in range(d):
            w[c] += eta * pi[c]


def _linear_steps_numpy(w, pi, ylab, lstride, pos, k, x, eta, beta):
    P = x.shape[0]
    for t in range(k):
        r = x @ w - ylab[(pos + t) * lstride]
        pi[:] = beta * pi - (x.T @ r) / P
        w += eta * pi


_uv_steps_numba = jit_kernel(_uv_steps)
_sensing_steps_numba = jit_kernel(_sensing_steps)
_mlp_steps_numba = jit_kernel(_mlp_steps)
_linear_steps_numba = jit_kernel(_linear_steps)

_ACT_IDS = {"linear": 0, "tanh": 1, "relu": 2}


class SGDMDriver:
    """Chunked in-place SGDM stepper bound to one model and noise source.

    backend: None picks the package default, "numba" or "numpy" forces
    a build (the numba build falls back to numpy when unavailable is an
    error instead, so benchmarks cannot silently compare numpy to
    itself).
    """

    def __init__(self, model, eta, beta, noise=None, stream=None, backend=None):
        if backend not in (None, "numba", "numpy"):
            raise ContractError(f"unknown backend {backend!r}")
        use_numba = USE_NUMBA if backend is None else backend == "numba"
        if use_numba and _uv_steps_numba is _uv_steps:
            raise ContractError("numba backend requested but numba is unavailable")
        self.eta = float(eta)
        self.beta = float(beta)
        self.noise = noise
        self._gen = None
        if noise is not None and noise.epsilon > 0.0:
            if stream is None:
                raise ContractError("noisy runs need a random stream")
            self._gen = stream.generator() if hasattr(stream, "generator") else stream
        clean = np.asarray(model.clean_labels, dtype=np.float64)
        self._clean = clean
        kind = model.kind
        if kind == "vector-uv":
            x = model.dataset.x
            args = (model.mu2 / model.n, model.scale, model.n)
            step = _uv_steps_numba if use_numba else _uv_steps_numpy
            self._reduce = lambda lab: lab @ x / x.size
            self._label_elems = x.size
        elif kind == "matrix-sensing":
            amats = np.ascontiguousarray(model.dataset.A)
            args = (amats, 2.0 / (model.d * model.n_samples), model.d)
            step = _sensing_steps_numba if use_numba else _sensing_steps_numpy
            self._reduce = None
            self._label_elems = clean.size
        elif kind == "mlp":
            d_in, n, d_out = model.widths
            args = (
                np.ascontiguousarray(model.dataset.x),
                _ACT_IDS[model.activation],
                model.scale,
                d_in,
                n,
                d_out,
            )
            step = _mlp_steps_numba if use_numba else _mlp_steps_numpy
            self._reduce = None
            self._label_elems = clean.size
        elif kind == "linear-regression":
            args = (np.ascontiguousarray(model.dataset.x),)
            step = _linear_steps_numba if use_numba else _linear_steps_numpy
            self._reduce = None
            self._label_elems = clean.size
        else:
            raise ContractError(f"no kernel for model kind {kind!r}")
        self._step = step
        self._args = args
        self.backend_used = "numba" if use_numba else "numpy"
        if self._gen is None:
            if self._reduce is None:
                self._buf = clean[None, ...].copy()
            else:
                self._buf = np.array([float(self._reduce(clean))])
            self._lstride = 0
            self._pos = 0
            self._rows = 0  # single row reused forever
        else:
            self._chunk = max(1, min(CHUNK_ROWS, _CHUNK_BUDGET // max(1, self._label_elems)))
            self._buf = None
            self._lstride = 1
            self._pos = 0
            self._rows = 0

    def _refill(self):
        lab = self.noise.draw_labels(self._clean, self._gen, self._chunk)
        self._buf = lab if self._reduce is None else self._reduce(lab)
        self._pos = 0
        self._rows = self._chunk

    def advance(self, w, pi, k):
        """Run k steps in place on (w, pi)."""
        while k > 0:
            if self._lstride == 0:
                self._step(w, pi, self._buf, 0, 0, k, *self._args, self.eta, self.beta)
                return
            if self._pos >= self._rows:
                self._refill()
            m = min(k, self._rows - self._pos)
            self._step(w, pi, self._buf, 1, self._pos, m, *self._args, self.eta, self.beta)
            self._pos += m
            k -= m
