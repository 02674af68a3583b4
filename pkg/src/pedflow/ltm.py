"""Link state as cumulative boundary counts, with sending and receiving flows.

Each link tracks the cumulative number of pedestrians that crossed its
upstream boundary (U) and its downstream boundary (V) at every grid instant,
optionally decomposed by destination.  Sending and receiving flows are the
classic kinematic-wave bounds evaluated against these curves: the sending
bound looks back a free-flow traversal (at the counterflow-degraded speed),
the receiving bound looks back a wave traversal and adds the storage.
Off-grid lookback instants are linearly interpolated.
"""

from __future__ import annotations

import numpy as np


class ConservationError(RuntimeError):
    """A curve update would break conservation (negative occupancy, overfill)."""


class CumulativeCurve:
    """Cumulative upstream/downstream counts of one link on the time grid.

    Arrays may be views into engine-wide storage; bin b corresponds to instant
    b * dt.  When `destinations` is non-empty, per-destination curves Ud/Vd of
    shape (n_destinations, n_bins + 1) are kept alongside the totals.
    """

    def __init__(self, n_bins, dt, destinations=(), U=None, V=None, Ud=None, Vd=None):
        self.dt = float(dt)
        self.n_bins = int(n_bins)
        self.destinations = tuple(destinations)
        shape = self.n_bins + 1
        self.U = np.zeros(shape) if U is None else U
        self.V = np.zeros(shape) if V is None else V
        if self.destinations:
            dshape = (len(self.destinations), shape)
            self.Ud = np.zeros(dshape) if Ud is None else Ud
            self.Vd = np.zeros(dshape) if Vd is None else Vd
        else:
            self.Ud = None
            self.Vd = None

    def occupancy(self, t: int) -> float:
        return float(self.U[t] - self.V[t])

    def interp_U(self, tau: float) -> float:
        return float(interp_at(self.U[None, :], np.array([tau]), self.dt)[0])

    def interp_V(self, tau: float) -> float:
        return float(interp_at(self.V[None, :], np.array([tau]), self.dt)[0])


def interp_at(arr: np.ndarray, tau: np.ndarray, dt: float, rows: np.ndarray | None = None) -> np.ndarray:
    """Linear interpolation of cumulative rows at per-row instants.

    arr has shape (n, n_bins + 1) with sample b at instant b * dt.  Instants
    before the simulation start read as zero (curves start empty).  `rows`
    selects which row each tau entry reads (defaults to one tau per row).
    """
    tau = np.asarray(tau, dtype=float)
    b = np.clip(tau / dt, 0.0, arr.shape[1] - 1)  # hold the end values, never extrapolate
    idx = np.minimum(b.astype(int), arr.shape[1] - 2)
    frac = b - idx
    if rows is None:
        rows = np.arange(arr.shape[0])
    return arr[rows, idx] * (1.0 - frac) + arr[rows, idx + 1] * frac


def sending_flows_at(U, V, t, dt, lengths, vhat, caps):
    """Sending flows of all links for the step starting at bin t (persons)."""
    tau = (t + 1) * dt - lengths / vhat
    boundary = interp_at(U, tau, dt) - V[:, t]
    return np.clip(np.minimum(boundary, caps * dt), 0.0, None)


def receiving_flows_at(V, U, t, dt, lengths, omegas, storage, caps):
    """Receiving flows of all links for the step starting at bin t (persons)."""
    tau = (t + 1) * dt - lengths / omegas
    boundary = interp_at(V, tau, dt) + storage - U[:, t]
    return np.clip(np.minimum(boundary, caps * dt), 0.0, None)


def sending_flow(link, curves: CumulativeCurve, t: int, vhat: float) -> float:
    """Most the link can deliver downstream during [t, t+1) at effective speed vhat."""
    if vhat <= 0:
        return 0.0
    return float(
        sending_flows_at(
            curves.U[None, :], curves.V[None, :], t, curves.dt,
            np.array([link.length]), np.array([vhat]), np.array([link.capacity]),
        )[0]
    )


def receiving_flow(link, curves: CumulativeCurve, t: int, effective_jam: float | None = None) -> float:
    """Most the link can absorb from upstream during [t, t+1).

    The storage term uses the link's physical jam density unless an effective
    jam density (already degraded by the density ratio) is passed in.
    """
    k_jam = link.k_jam if effective_jam is None else effective_jam
    storage = k_jam * link.length * link.width
    return float(
        receiving_flows_at(
            curves.V[None, :], curves.U[None, :], t, curves.dt,
            np.array([link.length]), np.array([link.omega]),
            np.array([storage]), np.array([link.capacity]),
        )[0]
    )


def advance(link, curves: CumulativeCurve, inflow, outflow, t: int) -> CumulativeCurve:
    """Apply one step's boundary transfers to the curves at bin t.

    inflow and outflow are persons during [t, t+1), either scalars (no
    decomposition) or arrays aligned with curves.destinations.  Raises
    ConservationError when the transfer would violate the bounds that the
    sending/receiving flows impose.
    """
    inflow = np.atleast_1d(np.asarray(inflow, dtype=float))
    outflow = np.atleast_1d(np.asarray(outflow, dtype=float))
    tol = 1e-9 * max(1.0, float(curves.U[t]))
    if (inflow < -tol).any() or (outflow < -tol).any():
        raise ConservationError(f"link {link.id}: negative transfer at bin {t}")
    total_in = float(inflow.sum())
    total_out = float(outflow.sum())
    occupancy = curves.occupancy(t)
    if total_out > occupancy + tol:
        raise ConservationError(
            f"link {link.id}: outflow {total_out} exceeds occupancy {occupancy} at bin {t}"
        )
    if total_out > link.capacity * curves.dt + tol:
        raise ConservationError(f"link {link.id}: outflow {total_out} exceeds capacity at bin {t}")
    if total_in > receiving_flow(link, curves, t) + tol:
        raise ConservationError(
            f"link {link.id}: inflow {total_in} exceeds receiving flow at bin {t}"
        )
    curves.U[t + 1] = curves.U[t] + total_in
    curves.V[t + 1] = curves.V[t] + total_out
    if curves.Ud is not None:
        if inflow.shape != (len(curves.destinations),) or outflow.shape != (len(curves.destinations),):
            raise ConservationError(
                f"link {link.id}: transfers must be decomposed over {len(curves.destinations)} destinations"
            )
        curves.Ud[:, t + 1] = curves.Ud[:, t] + inflow
        curves.Vd[:, t + 1] = curves.Vd[:, t] + outflow
        if (curves.Vd[:, t + 1] > curves.Ud[:, t + 1] + tol).any():
            raise ConservationError(
                f"link {link.id}: a destination's exits would overtake its entries at bin {t}"
            )
    return curves


def split_by_entry_order(U: np.ndarray, Ud: np.ndarray, r0: float, r1: float, t: int) -> np.ndarray:
    """Destination composition of the pedestrians ranked (r0, r1] on a link.

    Ranks are positions on the upstream cumulative curve; the split follows
    entry order, which is what keeps exits first-in-first-out.  Returns the
    per-destination counts, scaled to sum exactly to r1 - r0.
    """
    amount = r1 - r0
    if amount <= 0:
        return np.zeros(Ud.shape[0])
    w1 = _counts_up_to_rank(U, Ud, r1, t)
    w0 = _counts_up_to_rank(U, Ud, r0, t)
    split = np.clip(w1 - w0, 0.0, None)
    total = split.sum()
    if total <= 0:
        return np.zeros(Ud.shape[0])
    return split * (amount / total)


def _counts_up_to_rank(U: np.ndarray, Ud: np.ndarray, rank: float, t: int) -> np.ndarray:
    """Per-destination entries among the first `rank` entrants (interpolated)."""
    head = U[: t + 1]
    rank = min(rank, head[-1])
    idx = int(np.searchsorted(head, rank, side="left"))
    if idx == 0:
        return Ud[:, 0] * 0.0 if rank <= 0 else Ud[:, 0].copy()
    denom = head[idx] - head[idx - 1]
    frac = (rank - head[idx - 1]) / denom if denom > 0 else 0.0
    return Ud[:, idx - 1] * (1.0 - frac) + Ud[:, idx] * frac


def crossing_time(arr: np.ndarray, rank: float, dt: float, n_valid: int) -> float | None:
    """First instant a cumulative curve reaches `rank`, or None if it never does.

    Only bins up to n_valid are trusted (later bins may not be written yet).
    """
    head = arr[: n_valid + 1]
    if head[-1] < rank - 1e-12:
        return None
    idx = int(np.searchsorted(head, rank, side="left"))
    if idx == 0:
        return 0.0
    denom = head[idx] - head[idx - 1]
    frac = (rank - head[idx - 1]) / denom if denom > 0 else 0.0
    return (idx - 1 + frac) * dt
