"""Time-dependent variational dynamics of the multi-D2 state.

Variables. The propagated parameters are (A, B, Z) with Z the M x K array
of displacements on the concatenated thermofield mode axis. The linear
system is written for the holomorphic rates (alpha_dot, beta_dot, Z_dot),
where alpha_dot_i = A_dot_i - A_i Re(z_i^* . z_dot_i) is the rate of the
unnormalized amplitude A_i exp(-|z_i|^2/2) divided by that Gaussian factor.
In these variables the Gram matrix is G_ab = <d_a psi|d_b psi> and the
stationarity conditions of the Lagrangian read i G u_dot = dE/du^*, so the
right-hand side is -i <d_a psi|H|psi>.

Solve. The displacement block of G is W (x) 1 plus a rank-structured term
that only involves the M^2 contractions q_ji = z_j^* . z_dot_i. Eliminating
Z_dot leaves an (M^2 + 2M) system; Z_dot is then recovered with one
M x M solve. The ridge eps enters as G + eps 1.
"""
from __future__ import annotations

import json
import logging
import math
import time as _time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .ansatz import MD2State, spin_forms

__all__ = [
    "EomSystem",
    "EomSolution",
    "Trajectory",
    "SolveAbort",
    "TrajectoryAborted",
    "AssemblyError",
    "NumericalInconsistency",
    "assemble_eom",
    "solve_eom",
    "rk4_step",
    "deviation_sigma2",
    "propagate",
    "prepare_run",
    "run_trajectory",
    "convergence_sweep",
    "SweepReport",
]

log = logging.getLogger(__name__)

RIDGE_START = 1e-12
RIDGE_FACTOR = 1e2
RIDGE_CAP = 1e-6
RATE_LIMIT = 1e8
# reciprocal condition below this counts as numerically singular
RCOND_MIN = 1e-10


class SolveAbort(RuntimeError):
    pass


class AssemblyError(RuntimeError):
    pass


class NumericalInconsistency(RuntimeError):
    pass


class TrajectoryAborted(RuntimeError):
    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class EomSystem:
    A: np.ndarray
    B: np.ndarray
    Z: np.ndarray
    w: np.ndarray
    c: np.ndarray
    omega0: float
    S: np.ndarray
    Q: np.ndarray
    E: np.ndarray
    V: np.ndarray
    rho: np.ndarray
    s: np.ndarray
    sigma: np.ndarray
    ra: np.ndarray
    rb: np.ndarray
    R: np.ndarray
    regularization: float | None = None
    _gram: np.ndarray | None = field(default=None, repr=False)

    @property
    def M(self):
        return self.A.shape[0]

    @property
    def size(self):
        return 2 * self.M + self.Z.size

    @property
    def W(self):
        return self.S * self.rho

    @property
    def rhs(self):
        return np.concatenate([self.ra, self.rb, self.R.ravel()])

    @property
    def condition_estimate(self):
        return float(np.linalg.cond(self.W))

    @property
    def gram(self):
        """Dense P x P Gram matrix, ordering [alpha_dot, beta_dot, Z_dot row-major]."""
        if self._gram is None:
            self._gram = _dense_gram(self.S, self.W, self.A, self.B, self.Z)
        return self._gram

    def gram_matvec(self, u):
        M, K = self.Z.shape
        ad, bd, Zd = u[:M], u[M:2 * M], u[2 * M:].reshape(M, K)
        q = self.Z.conj() @ Zd.T
        S, W = self.S, self.W
        ga = S @ ad + np.sum(S * q * self.A[None, :], axis=1)
        gb = S @ bd + np.sum(S * q * self.B[None, :], axis=1)
        T = S * (np.outer(self.A.conj(), ad) + np.outer(self.B.conj(), bd)) + W * q
        gz = T @ self.Z + W @ Zd
        return np.concatenate([ga, gb, gz.ravel()])


def _dense_gram(S, W, A, B, Z):
    M, K = Z.shape
    P = 2 * M + M * K
    G = np.zeros((P, P), complex)
    Zc = Z.conj()
    G[:M, :M] = S
    G[M:2 * M, M:2 * M] = S
    zb = G[2 * M:, 2 * M:].reshape(M, K, M, K)
    for j in range(M):
        for i in range(M):
            G[j, 2 * M + i * K: 2 * M + (i + 1) * K] = S[j, i] * A[i] * Zc[j]
            G[M + j, 2 * M + i * K: 2 * M + (i + 1) * K] = S[j, i] * B[i] * Zc[j]
            G[2 * M + j * K: 2 * M + (j + 1) * K, i] = S[j, i] * A[j].conjugate() * Z[i]
            G[2 * M + j * K: 2 * M + (j + 1) * K, M + i] = S[j, i] * B[j].conjugate() * Z[i]
            zb[j, :, i, :] = W[j, i] * (np.eye(K) + np.outer(Z[i], Zc[j]))
    G[2 * M:, 2 * M:] = zb.reshape(M * K, M * K)
    return G


def _pair_terms(A, B, Z, w, c, omega0):
    Q, E, y = _kernels.pair_sums(Z, w, c)
    nrm = Q.diagonal().real
    logS = Q - 0.5 * (nrm[:, None] + nrm[None, :])
    np.fill_diagonal(logS, 0.0)
    S = np.exp(logS)
    V = y[None, :] + y.conj()[:, None]
    rho, s, sigma = spin_forms(A, B)
    return S, Q, E, V, rho, s, sigma


def _assemble(A, B, Z, w, c, omega0):
    S, Q, E, V, rho, s, sigma = _pair_terms(A, B, Z, w, c, omega0)
    half = 0.5 * omega0
    SE, SV = S * E, S * V
    ra = -1j * (half * (S @ A) + SE @ A + SV @ B)
    rb = -1j * (-half * (S @ B) + SE @ B + SV @ A)
    Sh = S * (half * s + rho * E + sigma * V)
    W = S * rho
    R = -1j * (Sh @ Z + w[None, :] * (W @ Z) + np.sum(S * sigma, axis=1)[:, None] * c[None, :])
    return EomSystem(A, B, Z, w, c, omega0, S, Q, E, V, rho, s, sigma, ra, rb, R)


def assemble_eom(state, h):
    if not state.is_finite():
        raise ValueError("state has non-finite parameters")
    if state.N_l != h.n_left or state.N_r != h.n_right:
        raise ValueError("state and Hamiltonian mode counts differ")
    return _assemble(state.A, state.B, state.displacements, h.frequencies, h.couplings, h.omega0)


@dataclass
class EomSolution:
    alpha_dot: np.ndarray
    beta_dot: np.ndarray
    Z_dot: np.ndarray
    A_dot: np.ndarray
    B_dot: np.ndarray
    ridge: float
    escalations: list

    @property
    def udot(self):
        """Solution in system coordinates [alpha_dot, beta_dot, Z_dot]."""
        return np.concatenate([self.alpha_dot, self.beta_dot, self.Z_dot.ravel()])


def _solve_reduced(sys, eps):
    A, B, Z, S = sys.A, sys.B, sys.Z, sys.S
    M = A.shape[0]
    W = S * sys.rho
    Wq = W + eps * np.eye(M)
    P = Z.conj() @ sys.R.T
    G = _kernels.reduced_matrix(S, W, sys.Q, A, B, eps)
    rhs = np.concatenate([P.ravel(), sys.ra, sys.rb])
    try:
        lu, piv = scipy.linalg.lu_factor(G, check_finite=False)
    except np.linalg.LinAlgError:
        return None, True
    anorm = np.abs(G).sum(axis=0).max()
    rcond, _ = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
    singular = not rcond > RCOND_MIN
    x = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    q = x[: M * M].reshape(M, M)
    ad, bd = x[M * M: M * M + M], x[M * M + M:]
    T = S * (np.outer(A.conj(), ad) + np.outer(B.conj(), bd)) + W * q
    try:
        Zd = scipy.linalg.solve(Wq, sys.R - T @ Z, assume_a="her", check_finite=False)
    except np.linalg.LinAlgError:
        return None, True
    return (ad, bd, Zd), singular


def solve_eom(sys, check_hermitian=False):
    """Solve (G + eps 1) u_dot = rhs with the adaptive ridge.

    Escalation multiplies eps by 100 from 1e-12 while the solve is singular
    (LAPACK reciprocal condition estimate below RCOND_MIN) or the rates
    exceed 1e8, up to 1e-6. Raises SolveAbort if the capped
    ridge still gives a divergent or non-finite solution.
    """
    if check_hermitian:
        G = sys.gram
        scale = max(1.0, float(np.max(np.abs(G))))
        resid = float(np.max(np.abs(G - G.conj().T)))
        if resid > 1e-8 * scale:
            raise AssemblyError(f"Gram matrix not Hermitian (residual {resid:.3e})")
    eps = RIDGE_START
    escalations = []
    while True:
        out, singular = _solve_reduced(sys, eps)
        ok = out is not None
        if ok:
            ad, bd, Zd = out
            size = math.sqrt(np.vdot(ad, ad).real + np.vdot(bd, bd).real + np.vdot(Zd, Zd).real)
            ok = math.isfinite(size) and size <= RATE_LIMIT
        if ok and (not singular or eps >= RIDGE_CAP):
            break
        if eps >= RIDGE_CAP:
            raise SolveAbort(f"ridge reached {RIDGE_CAP:g} without a bounded solution; "
                             "the multiplicity may exceed the occupied manifold")
        eps *= RIDGE_FACTOR
        escalations.append(eps)
    sys.regularization = eps
    q_diag = np.einsum("in,in->i", sys.Z.conj(), Zd).real
    return EomSolution(ad, bd, Zd, ad + sys.A * q_diag, bd + sys.B * q_diag, eps, escalations)


def _h2_expectation(sys):
    """<psi|H^2|psi> from coherent-state matrix elements of H applied twice."""
    E2, u = _kernels.pair_sums_sq(sys.Z, sys.w, sys.c)
    U = u[None, :] + u.conj()[:, None]
    csq = float(np.dot(sys.c, sys.c))
    E, V = sys.E, sys.V
    w0 = sys.omega0
    pair = (sys.rho * (0.25 * w0 * w0 + E * E + E2 + V * V + csq)
            + w0 * sys.s * E + sys.sigma * (2.0 * E * V + U))
    return np.sum(sys.S * pair)


def _sigma2(sys, sol):
    u = sol.udot
    norm = np.sum(sys.S * sys.rho).real
    h2 = _h2_expectation(sys).real
    dd = np.vdot(u, sys.gram_matvec(u)).real
    cross = np.vdot(u, sys.rhs).real
    val = (dd + h2 - 2.0 * cross) / norm
    if val < -1e-10 * max(h2 / norm, 1.0):
        raise NumericalInconsistency(f"deviation came out negative ({val:.3e})")
    return max(val, 0.0) / (sys.omega0 ** 2 if sys.omega0 else 1.0)


def deviation_sigma2(state, h, udot=None):
    """Squared residual ||(i d/dt - H) psi||^2 / (norm * w0^2)."""
    sys = assemble_eom(state, h)
    sol = udot if udot is not None else solve_eom(sys)
    return _sigma2(sys, sol)


class _Flow:
    def __init__(self, h):
        self.w = np.asarray(h.frequencies, float)
        self.c = np.asarray(h.couplings, float)
        self.omega0 = float(h.omega0)
        self.escalations = []

    def __call__(self, A, B, Z, t=None):
        sys = _assemble(A, B, Z, self.w, self.c, self.omega0)
        sol = solve_eom(sys)
        if sol.escalations:
            self.escalations.append((t, sol.ridge))
        return sys, sol

    def step(self, A, B, Z, dt, t=None, first=None):
        if first is None:
            first = self(A, B, Z, t)
        k1 = first[1]
        h2 = 0.5 * dt
        k2 = self(A + h2 * k1.A_dot, B + h2 * k1.B_dot, Z + h2 * k1.Z_dot, t)[1]
        k3 = self(A + h2 * k2.A_dot, B + h2 * k2.B_dot, Z + h2 * k2.Z_dot, t)[1]
        k4 = self(A + dt * k3.A_dot, B + dt * k3.B_dot, Z + dt * k3.Z_dot, t)[1]
        f = dt / 6.0
        A = A + f * (k1.A_dot + 2 * k2.A_dot + 2 * k3.A_dot + k4.A_dot)
        B = B + f * (k1.B_dot + 2 * k2.B_dot + 2 * k3.B_dot + k4.B_dot)
        Z = Z + f * (k1.Z_dot + 2 * k2.Z_dot + 2 * k3.Z_dot + k4.Z_dot)
        return A, B, Z


def rk4_step(state, h, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    A, B, Z = _Flow(h).step(state.A, state.B, state.displacements, dt)
    return MD2State.from_packed(A, B, Z, state.N_l, state.N_r, time=state.time + dt)


COLUMNS = ("t", "sigma_z", "norm", "energy", "sigma2")


@dataclass
class Trajectory:
    times: np.ndarray
    sigma_z: np.ndarray
    norm: np.ndarray
    energy: np.ndarray
    sigma2: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        for name in COLUMNS[1:]:
            if len(getattr(self, name)) != n:
                raise ValueError("all series of a trajectory must share one length")

    def __len__(self):
        return len(self.times)

    @property
    def max_sigma2(self):
        s = np.asarray(self.sigma2, float)
        s = s[np.isfinite(s)]
        return float(s.max()) if s.size else float("nan")

    def save(self, path):
        data = np.column_stack([self.times, self.sigma_z, self.norm, self.energy, self.sigma2])
        meta = json.dumps(self.metadata, default=_json_default, sort_keys=True)
        with open(path, "w") as fh:
            fh.write(f"# meta {meta}\n")
            fh.write("# " + " ".join(COLUMNS) + "\n")
            np.savetxt(fh, data, fmt="%.17g")

    @classmethod
    def load(cls, path):
        meta = {}
        names = None
        with open(path) as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                body = line[1:].strip()
                if body.startswith("meta "):
                    meta = json.loads(body[5:])
                else:
                    names = body.split()
        data = np.loadtxt(path, ndmin=2)
        if names is None:
            names = list(COLUMNS[: data.shape[1]])
        cols = {n: data[:, k] for k, n in enumerate(names)}
        if "t" not in cols or "sigma_z" not in cols:
            raise ValueError(f"{path}: needs at least t and sigma_z columns")
        nan = np.full(len(data), np.nan)
        return cls(cols["t"], cols["sigma_z"], cols.get("norm", nan),
                   cols.get("energy", nan), cols.get("sigma2", nan), meta)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


def _observables(sys):
    norm = np.sum(sys.S * sys.rho).real
    sz = np.sum(sys.S * sys.s).real / norm
    en = np.sum(sys.S * (0.5 * sys.omega0 * sys.s + sys.rho * sys.E + sys.sigma * sys.V)).real / norm
    return sz, norm, en


def propagate(h, state, dt=0.01, t_final=10.0, output_stride=1, sigma2_stride=10,
              metadata=None):
    """Fixed-step RK4 from ``state`` to ``t_final``.

    Observables are recorded every ``output_stride`` steps and sigma^2 on
    recorded steps that are multiples of ``sigma2_stride`` (NaN elsewhere).
    On a solver abort the partial trajectory rides on TrajectoryAborted.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    n_steps = int(round(t_final / dt))
    flow = _Flow(h)
    A, B, Z = state.A.copy(), state.B.copy(), state.displacements.copy()
    t0 = state.time
    rows = []
    meta = dict(metadata or {})
    meta.update(M=state.M, N_left=state.N_l, N_right=state.N_r, dt=dt)
    started = _time.perf_counter()

    def record(step, first):
        sys, sol = first
        sz, nrm, en = _observables(sys)
        s2 = _sigma2(sys, sol) if step % sigma2_stride == 0 else float("nan")
        rows.append((t0 + step * dt, sz, nrm, en, s2))

    def build():
        arr = np.array(rows, float).reshape(-1, 5)
        meta["regularization_events"] = [
            {"t": t, "ridge": r} for t, r in flow.escalations]
        meta["wall_time"] = _time.perf_counter() - started
        return Trajectory(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], meta)

    try:
        for step in range(n_steps + 1):
            t = t0 + step * dt
            first = flow(A, B, Z, t)
            if step % output_stride == 0 or step == n_steps:
                record(step, first)
            if step == n_steps:
                break
            A, B, Z = flow.step(A, B, Z, dt, t, first)
            if not (np.isfinite(A).all() and np.isfinite(B).all() and np.isfinite(Z).all()):
                raise SolveAbort(f"non-finite parameters after step to t={t + dt:.4g}")
    except SolveAbort as exc:
        meta["aborted"] = str(exc)
        raise TrajectoryAborted(str(exc), build()) from exc
    return build()


def prepare_run(config):
    """Baths, effective Hamiltonian and initial state for a RunConfig."""
    from .bath import SpectralDensity, discretize_id, discretize_log
    from .tfd import ThermalBathPair, build_effective_hamiltonian, initial_state_spec

    baths = []
    horizon = max(config.t_final, 1.0)
    for alpha, wc, T in ((config.alpha_left, config.omega_c_left, config.T_left),
                         (config.alpha_right, config.omega_c_right, config.T_right)):
        sd = SpectralDensity(alpha, wc)
        beta = 1.0 / T
        wmax = config.omega_max_factor * wc
        if config.scheme == "id":
            bath = discretize_id(sd, beta, omega_max=wmax, horizon=horizon,
                                 tolerance=config.tolerance, max_modes=config.modes or None)
        else:
            bath = discretize_log(sd, beta, omega_max=wmax, n_modes=config.modes, horizon=horizon)
        baths.append(bath)
    thermal = ThermalBathPair.from_baths(*baths)
    h = build_effective_hamiltonian(baths[0], baths[1], thermal, omega0=1.0, delta=config.delta)
    wmax_mode = float(max(h.left_frequencies.max(), h.right_frequencies.max()))
    if config.dt >= 1.0 / wmax_mode:
        warnings.warn(f"dt={config.dt} is not below 1/max(w_k)={1.0 / wmax_mode:.4g}")
    state = initial_state_spec(config.qubit_init, config.M, (baths[0].n_modes, baths[1].n_modes),
                               noise=config.noise, seed=config.seed)
    return baths[0], baths[1], h, state


def run_trajectory(config):
    bath_l, bath_r, h, state = prepare_run(config)
    meta = {
        "seed": config.seed,
        "baths": [{"n_modes": b.n_modes, "beta": b.beta,
                   "certification_error": b.certification_error} for b in (bath_l, bath_r)],
    }
    return propagate(h, state, dt=config.dt, t_final=config.t_final,
                     output_stride=config.output_stride, sigma2_stride=config.sigma2_stride,
                     metadata=meta)


@dataclass
class SweepReport:
    stage_M: list
    stage_N: list
    converged_M: int | None
    converged_N: int | None
    tolerance: float

    def to_dict(self):
        return {"stage_M": self.stage_M, "stage_N": self.stage_N,
                "converged_M": self.converged_M, "converged_N": self.converged_N,
                "tolerance": self.tolerance}


def _sweep_job(config):
    try:
        return run_trajectory(config)
    except TrajectoryAborted as exc:
        return exc.trajectory


def _run_many(configs, workers):
    if workers <= 1 or len(configs) <= 1:
        return [_sweep_job(c) for c in configs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_job, configs))


def _ladder(trajs, labels, tol_conv):
    """Walk a nondecreasing ladder; the first label whose run agrees with
    the next one and keeps sigma^2 under 1e-2 is the converged value."""
    rows = []
    found = None
    ref = trajs[-1].sigma_z
    tol = tol_conv if tol_conv is not None else max(1e-2 * float(np.ptp(ref)), 1e-4)
    for k, (lab, tr) in enumerate(zip(labels, trajs)):
        row = {"value": lab, "max_sigma2": tr.max_sigma2,
               "aborted": "aborted" in tr.metadata}
        if k + 1 < len(trajs):
            nxt = trajs[k + 1]
            n = min(len(tr), len(nxt))
            row["max_diff_next"] = float(np.max(np.abs(tr.sigma_z[:n] - nxt.sigma_z[:n])))
            ok = (row["max_diff_next"] < tol and tr.max_sigma2 < 1e-2
                  and len(tr) == len(nxt) and not row["aborted"])
            if ok and found is None:
                found = lab
        rows.append(row)
    return rows, found, tol


def convergence_sweep(config, M_list, N_list=None, tol_conv=None, workers=1):
    """Two-stage protocol: grow M at the first bath size, then grow the
    bath size at the converged M."""
    from dataclasses import replace
    M_list = list(M_list)
    N_list = list(N_list) if N_list else [config.modes]
    if M_list != sorted(M_list) or N_list != sorted(N_list):
        raise ValueError("sweep lists must be nondecreasing")
    base = replace(config, modes=N_list[0])
    trajs = _run_many([replace(base, M=m) for m in M_list], workers)
    rows_M, m_conv, tol = _ladder(trajs, M_list, tol_conv)
    rows_N, n_conv = [], None
    if m_conv is not None and len(N_list) > 1:
        trajs = _run_many([replace(config, M=m_conv, modes=n) for n in N_list], workers)
        rows_N, n_conv, _ = _ladder(trajs, N_list, tol_conv)
    elif m_conv is not None:
        n_conv = N_list[0]
    return SweepReport(rows_M, rows_N, m_conv, n_conv, tol)
