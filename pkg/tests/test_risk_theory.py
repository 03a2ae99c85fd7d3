import numpy as np
import pytest

from precondrisk import (DomainError, MisspecSpec, OutOfRegimeError,
                         PreconditionerSpec, RiskReport, bias_lower_bound,
                         make_joint, make_poly_decay, make_two_atom,
                         make_uniform, misspecified_bias, risk_report,
                         solve_m, sweep_alpha, theoretical_bias,
                         theoretical_variance)
from precondrisk.risk_theory import RISK_CSV_COLUMNS
from precondrisk.spectra import precondition_spectrum
from conftest import inv_prior, iso_prior

SPECTRA = [make_two_atom(20.0), make_uniform(20.0, 50),
           make_poly_decay(1.0, 500.0, 60)]


class TestVariance:
    def test_frozen_two_atom_values(self, two_atom20, gd, ngd):
        fxp_gd = precondition_spectrum(two_atom20, gd)
        assert theoretical_variance(fxp_gd, 2.0, 1.0) == pytest.approx(
            2.3478713763747807, rel=1e-10)
        fxp_ngd = precondition_spectrum(two_atom20, ngd)
        assert theoretical_variance(fxp_ngd, 2.0, 1.0) == pytest.approx(
            1.0, abs=1e-12)

    @pytest.mark.parametrize("gamma", [1.2, 2.0, 5.0])
    @pytest.mark.parametrize("spec", SPECTRA, ids=["two_atom", "uniform",
                                                   "poly"])
    def test_ngd_hits_lower_bound(self, spec, gamma, ngd):
        fxp = precondition_spectrum(spec, ngd)
        v = theoretical_variance(fxp, gamma, 1.0)
        assert v == pytest.approx(1.0 / (gamma - 1.0), abs=1e-11)

    @pytest.mark.parametrize("spec", SPECTRA, ids=["two_atom", "uniform",
                                                   "poly"])
    def test_other_preconditioners_above_bound(self, spec):
        gamma = 2.0
        for p in (PreconditionerSpec.identity(),
                  PreconditionerSpec.power(0.5),
                  PreconditionerSpec.damped_inverse(0.5)):
            fxp = precondition_spectrum(spec, p)
            assert theoretical_variance(fxp, gamma, 1.0) \
                > 1.0 / (gamma - 1.0) + 1e-6

    def test_sigma_scaling(self, two_atom20, gd):
        fxp = precondition_spectrum(two_atom20, gd)
        v1 = theoretical_variance(fxp, 2.0, 1.0)
        assert theoretical_variance(fxp, 2.0, 2.5) == pytest.approx(2.5 * v1)
        assert theoretical_variance(fxp, 2.0, 0.0) == 0.0

    def test_underparameterized_rejected(self, two_atom20):
        with pytest.raises(OutOfRegimeError):
            theoretical_variance(two_atom20, 1.0, 1.0)


class TestBias:
    def test_frozen_two_atom_values(self, two_atom20, gd, ngd):
        j_gd = make_joint(two_atom20, iso_prior, gd)
        assert theoretical_bias(j_gd, 2.0) == pytest.approx(
            0.15791661046371638, rel=1e-10)
        j_ngd = make_joint(two_atom20, iso_prior, ngd)
        assert theoretical_bias(j_ngd, 2.0) == pytest.approx(
            0.37076788956188556, rel=1e-10)

    def test_frozen_misaligned_values(self, two_atom20, gd, ngd):
        # Sigma_theta = Sigma_X^-1: NGD bias is exactly E[ux uth]/gamma... = 1/2
        j_ngd = make_joint(two_atom20, inv_prior, ngd)
        assert theoretical_bias(j_ngd, 2.0) == pytest.approx(0.5, abs=1e-12)
        j_gd = make_joint(two_atom20, inv_prior, gd)
        assert theoretical_bias(j_gd, 2.0) == pytest.approx(
            1.1739356881873895, rel=1e-10)

    @pytest.mark.parametrize("spec", SPECTRA, ids=["two_atom", "uniform",
                                                   "poly"])
    @pytest.mark.parametrize("prior", [iso_prior, inv_prior],
                             ids=["iso", "inv"])
    def test_prior_match_attains_lower_bound(self, spec, prior):
        gamma = 2.0
        bound = bias_lower_bound(spec, prior, gamma)
        match = make_joint(spec, prior, PreconditionerSpec.prior_match())
        assert theoretical_bias(match, gamma) == pytest.approx(bound,
                                                               rel=1e-10)
        for p in (PreconditionerSpec.identity(),
                  PreconditionerSpec.power(0.5)):
            joint = make_joint(spec, prior, p)
            assert theoretical_bias(joint, gamma) >= bound - 1e-12

    def test_lower_bound_formula(self, two_atom20):
        # bound = 1/(gamma * m) with m solved on the prior-matched spectrum
        gamma = 3.0
        match = make_joint(two_atom20, iso_prior,
                           PreconditionerSpec.prior_match())
        sol = solve_m(match.xp_measure(), gamma)
        assert bias_lower_bound(two_atom20, iso_prior, gamma) \
            == pytest.approx(1.0 / (gamma * sol.m0), rel=1e-12)


class TestMisspecification:
    def test_additive_structure(self, two_atom20, gd):
        joint = make_joint(two_atom20, iso_prior, gd)
        gamma = 2.0
        base = theoretical_bias(joint, gamma)
        fxp = precondition_spectrum(two_atom20, gd)
        v0 = theoretical_variance(fxp, gamma, 1.0)
        for tau in (0.1, 0.3, 1.0):
            mis = misspecified_bias(joint, gamma, MisspecSpec(tau))
            assert mis == pytest.approx(base + tau * (1.0 + v0), rel=1e-12)

    def test_from_joint_trace(self, two_atom20, gd):
        joint = make_joint(two_atom20, iso_prior, gd)
        mis = MisspecSpec.from_joint(joint)
        assert mis.trace_term == pytest.approx(
            float(np.sum(joint.weights * joint.ux * joint.utheta)))

    def test_negative_trace_rejected(self):
        with pytest.raises(DomainError):
            MisspecSpec(-0.1)


class TestReportsAndSweeps:
    def test_report_fields(self, two_atom20, ngd):
        rep = risk_report(two_atom20, iso_prior, ngd, 2.0, 1.0)
        assert isinstance(rep, RiskReport)
        assert rep.total == pytest.approx(rep.bias + rep.variance)
        assert rep.preconditioner == "inverse_pop_fisher"
        assert rep.gamma == 2.0
        row = rep.to_csv_row()
        assert len(row) == len(RISK_CSV_COLUMNS)

    @pytest.mark.parametrize("family", ["power", "additive_interp",
                                        "damped_inverse"])
    def test_sweep_endpoints_are_gd_and_ngd(self, two_atom20, family,
                                            gd, ngd):
        reports = dict(sweep_alpha(two_atom20, iso_prior, 2.0, 1.0, family,
                                   [0.0, 0.5, 1.0]))
        rep_gd = risk_report(two_atom20, iso_prior, gd, 2.0, 1.0)
        rep_ngd = risk_report(two_atom20, iso_prior, ngd, 2.0, 1.0)
        assert reports[0.0].variance == pytest.approx(rep_gd.variance,
                                                      rel=1e-10)
        assert reports[0.0].bias == pytest.approx(rep_gd.bias, rel=1e-10)
        assert reports[1.0].variance == pytest.approx(rep_ngd.variance,
                                                      rel=1e-10)
        assert reports[1.0].bias == pytest.approx(rep_ngd.bias, rel=1e-10)

    def test_sweep_rejects_unsorted(self, two_atom20):
        with pytest.raises(DomainError):
            sweep_alpha(two_atom20, iso_prior, 2.0, 1.0, "power",
                        [0.5, 0.1])

    def test_sweep_rejects_unknown_family(self, two_atom20):
        with pytest.raises(DomainError):
            sweep_alpha(two_atom20, iso_prior, 2.0, 1.0, "newton", [0.5])

    def test_sweep_rejects_out_of_range(self, two_atom20):
        with pytest.raises(DomainError):
            sweep_alpha(two_atom20, iso_prior, 2.0, 1.0, "power",
                        [0.0, 1.2])
