from trigroove.model import TINY_HPARAMS
from trigroove.model.gradcheck import grad_check, perturbation_sanity


def test_analytic_gradients_match_finite_differences():
    assert grad_check(TINY_HPARAMS, seed=0) < 1e-4


def test_zero_perturbation_leaves_loss_unchanged():
    before, after = perturbation_sanity()
    assert before == after


def test_grad_check_deterministic():
    assert grad_check(TINY_HPARAMS, seed=3) == grad_check(TINY_HPARAMS, seed=3)
