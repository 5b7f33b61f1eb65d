"""Adaptive driver: marking, hp decision and the solve-estimate-refine loop.

Marking selects elements whose squared indicator is at least sigma times the
mean squared contribution, eta_K^2 >= sigma * eta^2 / card(T) (sigma = 1).
In hp mode the choice between h- and p-refinement follows the predicted-error
strategy: an element whose indicator undershoots its prediction is p-refined,
otherwise h-refined.  Predictions start at zero (first pass is pure h) and
are updated with gamma_h = gamma_p = gamma_n = 1, lambda = 0.2.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import estimators, fluxrec
from .dofmap import MAX_P, DegreeMap
from .mesh import refine_elements
from .mixed import solve_mixed
from .primal import PrimalSpace, solve_primal

MW_LAMBDA = 0.2
MW_GAMMA_H = 1.0
MW_GAMMA_P = 1.0
MW_GAMMA_N = 1.0


@dataclass
class IterationRecord:
    iteration: int
    ncells: int
    ndof: int
    h_max: float
    p_min: int
    p_max: int
    err_primal: float = math.nan
    err_true: float = math.nan
    err_mixed_pair: float = math.nan
    eta_eq: float = math.nan
    eta_res: float = math.nan
    eta_flux: float = math.nan
    I_eq: float = math.nan
    I_res: float = math.nan
    oscillation: float = math.nan
    pou_quantity: float = math.nan
    wall_ms: float = 0.0

    CSV_FIELDS = (
        "iteration ncells ndof h_max p_min p_max err_primal err_true err_mixed_pair "
        "eta_eq eta_res eta_flux I_eq I_res oscillation pou_quantity wall_ms"
    ).split()

    def as_row(self):
        return [getattr(self, f) for f in self.CSV_FIELDS]


def mark_elements(eta2, sigma=1.0):
    """Ids whose squared indicator exceeds sigma times the mean contribution,
    i.e. eta_K^2 >= sigma * eta^2 / card(T)."""
    eta2 = np.asarray(eta2)
    thr = sigma * eta2.sum() / eta2.size
    return [int(k) for k in range(eta2.size) if eta2[k] >= thr]


def hp_decide(eta2, eta2_pred, marked, degrees):
    """Split marked cells into (h_set, p_set) by the error prediction."""
    h_set, p_set = [], []
    for k in marked:
        if eta2[k] <= eta2_pred[k] and degrees.cell[k] < MAX_P:
            p_set.append(k)
        else:
            h_set.append(k)
    return h_set, p_set


def run_iteration(case, mesh, degrees, estimator="eq", stab="drecipe",
                  true_error=False):
    """Solve, estimate and collect metrics on one mesh.

    Returns (record, eta2_per_element, details) where details carries the
    solution objects for callers that need them.
    """
    t0 = time.perf_counter()
    psol = solve_primal(mesh, degrees, case, stab)
    rec = IterationRecord(
        iteration=0,
        ncells=mesh.num_cells,
        ndof=psol.space.ndof,
        h_max=max(mesh.cell_geom(k).diameter for k in range(mesh.num_cells)),
        p_min=int(degrees.cell.min()),
        p_max=int(degrees.cell.max()),
    )
    err2_primal = None
    if case.has_exact:
        err2_primal = estimators.h1_error_primal(case, psol)
        rec.err_primal = float(np.sqrt(err2_primal.sum()))
        if true_error:
            from .lifting import true_h1_error

            rec.err_true = true_h1_error(case, psol)
    details = {"primal": psol}

    if estimator == "eq":
        msol = solve_mixed(mesh, degrees, case, stab)
        details["mixed"] = msol
        eta2 = estimators.eta_eq(psol, msol)
        rec.eta_eq = float(np.sqrt(eta2.sum()))
        if case.has_exact:
            err2_flux = estimators.flux_error(case, msol.elements, msol.cell_flux, mesh)
            rec.err_mixed_pair = float(np.sqrt(err2_primal.sum() + err2_flux.sum()))
            rec.I_eq = rec.eta_eq / rec.err_mixed_pair
        if np.allclose(mesh.kappa, 1.0):
            eta2_res = estimators.eta_res(case, psol)
            rec.eta_res = float(np.sqrt(eta2_res.sum()))
            if case.has_exact:
                rec.I_res = rec.eta_res / rec.err_primal
    elif estimator == "res":
        eta2 = estimators.eta_res(case, psol)
        rec.eta_res = float(np.sqrt(eta2.sum()))
        if case.has_exact:
            rec.I_res = rec.eta_res / rec.err_primal
    elif estimator == "flux":
        frec = fluxrec.reconstruct_flux(case, psol, stab)
        details["flux"] = frec
        eta2 = fluxrec.eta_flux(case, psol, frec)
        rec.eta_flux = float(np.sqrt(eta2.sum()))
        rec.oscillation = fluxrec.oscillation(case, frec)
        rec.pou_quantity = fluxrec.pou_quantity(frec)
    else:
        raise ValueError(f"unknown estimator '{estimator}'")
    rec.wall_ms = 1e3 * (time.perf_counter() - t0)
    return rec, np.asarray(eta2), details


def drive(case, mesh, p, mode="adapt-h", estimator="eq", iters=6, stab="drecipe",
          sigma=1.0, true_error=False, max_ndof=None):
    """Run the solve-estimate-mark-refine loop; returns (records, final state).

    ``mode``: 'uniform' refines every element, 'adapt-h' refines marked
    elements, 'adapt-hp' additionally raises degrees via the prediction rule.
    ``max_ndof`` stops the loop early once an iteration reaches that size.
    """
    degrees = DegreeMap.uniform(mesh, p) if np.isscalar(p) else DegreeMap(mesh, p)
    eta2_pred = np.zeros(mesh.num_cells)
    records = []
    for it in range(1, iters + 1):
        rec, eta2, details = run_iteration(case, mesh, degrees, estimator, stab,
                                           true_error=true_error)
        rec.iteration = it
        records.append(rec)
        if it == iters or (max_ndof is not None and rec.ndof >= max_ndof):
            break
        if mode == "uniform":
            h_set, p_set = list(range(mesh.num_cells)), []
        else:
            marked = mark_elements(eta2, sigma)
            if mode == "adapt-h":
                h_set, p_set = marked, []
            elif mode == "adapt-hp":
                h_set, p_set = hp_decide(eta2, eta2_pred, marked, degrees)
            else:
                raise ValueError(f"unknown mode '{mode}'")
        new_mesh, child_map = refine_elements(mesh, h_set)
        new_deg = np.zeros(new_mesh.num_cells, dtype=int)
        new_pred = np.zeros(new_mesh.num_cells)
        p_set = set(p_set)
        h_set_s = set(h_set)
        for k_old, children in child_map.items():
            pk = degrees.cell[k_old]
            if k_old in h_set_s:
                for c in children:
                    new_deg[c] = pk
                    new_pred[c] = (
                        MW_GAMMA_H * 0.5 ** (2 * pk) * eta2[k_old] / len(children)
                    )
            elif k_old in p_set:
                c = children[0]
                new_deg[c] = pk + 1
                new_pred[c] = MW_GAMMA_P * MW_LAMBDA * eta2[k_old]
            else:
                c = children[0]
                new_deg[c] = pk
                new_pred[c] = MW_GAMMA_N * eta2_pred[k_old]
        mesh = new_mesh
        degrees = DegreeMap(mesh, new_deg)
        eta2_pred = new_pred
    return records, {"mesh": mesh, "degrees": degrees, "details": details}


def uniform_sequence(case, family, p, levels, estimator="flux", stab="drecipe",
                     true_error=False):
    """Run on the uniform mesh hierarchy level=levels[0]..levels[-1]."""
    from .mesh import build_mesh

    records = []
    for i, lvl in enumerate(levels, start=1):
        mesh = build_mesh(case.domain, family, lvl)
        degrees = DegreeMap.uniform(mesh, p)
        rec, _, _ = run_iteration(case, mesh, degrees, estimator, stab,
                                  true_error=true_error)
        rec.iteration = i
        records.append(rec)
    return records
