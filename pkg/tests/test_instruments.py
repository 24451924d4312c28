import numpy as np
import pytest

from qbinfer.errors import (
    DimensionChainMismatch,
    NotCommuting,
    OutcomeExplosion,
    UnknownLabel,
)
from qbinfer.instruments import (
    KrausInstrument,
    apply_on_event,
    compose,
    dilate,
    dual_apply,
    induced_observable,
    joint_observable_commuting,
    sequential_marginals,
    statistically_equivalent,
)
from qbinfer.observables import (
    DensityMatrix,
    OutcomeSpace,
    induced_measure,
    marginal_observable,
    split_label,
)
from qbinfer.rand import (
    luders_x,
    luders_z,
    noisy_readout,
    random_density_matrix,
    random_hermitian,
    random_instrument,
    random_unitary,
)

PAULI_Z = np.diag([1.0, -1.0]).astype(complex)


def unitary_instrument(u):
    return KrausInstrument.channel([u])


def test_completeness_enforced():
    with pytest.raises(ValueError):
        KrausInstrument(
            2, 2, OutcomeSpace(("0",)), {"0": [np.sqrt(0.9) * np.eye(2, dtype=complex)]}
        )


def test_linear_dependence_rejected():
    k = np.sqrt(0.5) * np.eye(2, dtype=complex)
    with pytest.raises(ValueError):
        KrausInstrument(2, 2, OutcomeSpace(("0",)), {"0": [k, k]})


def test_apply_empty_event():
    inst = luders_z()
    out = apply_on_event(inst, [], DensityMatrix.maximally_mixed(2))
    assert np.array_equal(out, np.zeros((2, 2)))


def test_apply_unitary_conjugates():
    gen = np.random.default_rng(0)
    u = random_unitary(gen, 2)
    inst = unitary_instrument(u)
    rho = random_density_matrix(gen, 2)
    out = apply_on_event(inst, ["x0"], rho)
    assert np.abs(out - u @ rho.matrix @ u.conj().T).max() <= 1e-12


def test_apply_luders_event():
    inst = luders_z()
    out = apply_on_event(inst, ["0"], DensityMatrix.maximally_mixed(2))
    # oracle: P0 (I/2) P0 = 0.5 |0><0| by hand
    assert np.abs(out - 0.5 * np.diag([1.0, 0.0])).max() <= 1e-14


def test_apply_unknown_label():
    with pytest.raises(UnknownLabel):
        apply_on_event(luders_z(), ["nope"], DensityMatrix.maximally_mixed(2))


def test_apply_full_space_trace_one():
    gen = np.random.default_rng(3)
    for _ in range(10):
        inst = random_instrument(gen, 3, 4, 2)
        rho = random_density_matrix(gen, 3)
        out = apply_on_event(inst, inst.space.labels, rho)
        assert np.trace(out).real == pytest.approx(1.0, abs=1e-9)


def test_dual_completeness():
    gen = np.random.default_rng(5)
    inst = random_instrument(gen, 3, 3, 2)
    out = dual_apply(inst, inst.space.labels, np.eye(3))
    assert np.abs(out - np.eye(3)).max() <= 1e-10


def test_dual_luders_projector():
    out = dual_apply(luders_z(), ["0"], np.eye(2))
    assert np.abs(out - np.diag([1.0, 0.0])).max() <= 1e-14


def test_dual_unitary_heisenberg():
    gen = np.random.default_rng(1)
    u = random_unitary(gen, 2)
    out = dual_apply(unitary_instrument(u), ["x0"], PAULI_Z)
    assert np.abs(out - u.conj().T @ PAULI_Z @ u).max() <= 1e-12


def test_duality_identity_random():
    gen = np.random.default_rng(7)
    for _ in range(200):
        d = int(gen.integers(2, 5))
        inst = random_instrument(gen, d, int(gen.integers(2, 6)), int(gen.integers(1, 4)))
        rho = random_density_matrix(gen, d)
        b = random_hermitian(gen, d)
        n_evt = int(gen.integers(1, inst.n_outcomes + 1))
        event = list(gen.choice(inst.space.labels, size=n_evt, replace=False))
        lhs = np.trace(apply_on_event(inst, event, rho) @ b)
        rhs = np.trace(rho.matrix @ dual_apply(inst, event, b))
        assert abs(lhs - rhs) <= 1e-10


def test_additivity_on_disjoint_events():
    gen = np.random.default_rng(9)
    inst = random_instrument(gen, 2, 4, 2)
    rho = random_density_matrix(gen, 2)
    a = apply_on_event(inst, ["0", "1"], rho)
    b = apply_on_event(inst, ["2", "3"], rho)
    whole = apply_on_event(inst, ["0", "1", "2", "3"], rho)
    assert np.abs((a + b) - whole).max() <= 1e-15  # equal up to float reassociation


def test_induced_observable_unitary():
    gen = np.random.default_rng(2)
    inst = unitary_instrument(random_unitary(gen, 2))
    povm = induced_observable(inst)
    assert np.abs(povm.effect("x0") - np.eye(2)).max() <= 1e-12


def test_induced_observable_luders():
    povm = induced_observable(luders_z())
    assert np.abs(povm.effect("0") - np.diag([1.0, 0.0])).max() <= 1e-14


def test_induced_observable_noisy_readout():
    povm = induced_observable(noisy_readout(0.8))
    assert np.allclose(povm.effect("0"), np.diag([0.8, 0.2]))
    assert np.allclose(povm.effect("1"), np.diag([0.2, 0.8]))


def test_compose_single_returns_same_object():
    inst = luders_z()
    assert compose([inst]) is inst


def test_compose_unitaries():
    gen = np.random.default_rng(4)
    u, v = random_unitary(gen, 2), random_unitary(gen, 2)
    comp = compose([unitary_instrument(u), unitary_instrument(v)])
    assert comp.space.labels == ("x0,x0",)
    assert np.abs(comp.kraus_for("x0,x0")[0] - v @ u).max() <= 1e-12


def test_compose_luders_prunes_zero_products():
    comp = compose([luders_z(), luders_z()])
    assert set(comp.space.labels) == {"0,0", "0,1", "1,0", "1,1"}
    assert comp.kraus_for("0,1") == []  # |1><1| |0><0| = 0, pruned
    dist = induced_measure(induced_observable(comp), DensityMatrix.maximally_mixed(2))
    # oracle: brute-force enumeration of projector products on I/2
    assert dist.prob("0,0") == pytest.approx(0.5, abs=1e-12)
    assert dist.prob("1,1") == pytest.approx(0.5, abs=1e-12)
    assert dist.prob("0,1") == 0.0
    assert dist.prob("1,0") == 0.0


def test_compose_reduces_dependent_products():
    # diagonal operators hit by a rank-1 projector become parallel; the
    # reduction must collapse them to one operator with the same action
    k1 = np.diag([np.sqrt(0.4), np.sqrt(0.6)]).astype(complex)
    k2 = np.diag([np.sqrt(0.6), np.sqrt(0.4)]).astype(complex)
    noisy = KrausInstrument.channel([k1, k2])
    comp = compose([luders_z(), noisy])
    assert len(comp.kraus_for("0,x0")) == 1
    gen = np.random.default_rng(0)
    rho = random_density_matrix(gen, 2)
    for lab in comp.space.labels:
        l1, l2 = split_label(lab)
        chained = apply_on_event(noisy, [l2], apply_on_event(luders_z(), [l1], rho))
        assert np.abs(apply_on_event(comp, [lab], rho) - chained).max() <= 1e-10


def test_compose_matches_chained_action():
    gen = np.random.default_rng(11)
    for _ in range(20):
        d = int(gen.integers(2, 4))
        i1 = random_instrument(gen, d, 2, 2)
        i2 = random_instrument(gen, d, 3, 1)
        comp = compose([i1, i2])
        rho = random_density_matrix(gen, d)
        for lab in comp.space.labels:
            l1, l2 = split_label(lab)
            chained = apply_on_event(i2, [l2], apply_on_event(i1, [l1], rho))
            assert np.abs(apply_on_event(comp, [lab], rho) - chained).max() <= 1e-10


def test_compose_associativity():
    gen = np.random.default_rng(13)
    i1 = random_instrument(gen, 2, 2, 1)
    i2 = random_instrument(gen, 2, 2, 2)
    i3 = random_instrument(gen, 2, 2, 1)
    left = compose([compose([i1, i2]), i3])
    flat = compose([i1, i2, i3])
    rho = random_density_matrix(gen, 2)
    for lab in flat.space.labels:
        assert (
            np.abs(
                apply_on_event(flat, [lab], rho) - apply_on_event(left, [lab], rho)
            ).max()
            <= 1e-10
        )


def test_compose_dimension_chain():
    gen = np.random.default_rng(15)
    i1 = random_instrument(gen, 2, 2, 1, dim_out=3)
    i2 = random_instrument(gen, 3, 2, 1, dim_out=2)
    comp = compose([i1, i2])
    assert comp.dim_in == 2 and comp.dim_out == 2
    with pytest.raises(DimensionChainMismatch):
        compose([i2, i2])


def test_compose_outcome_explosion():
    gen = np.random.default_rng(17)
    inst = random_instrument(gen, 2, 32, 1)
    with pytest.raises(OutcomeExplosion):
        compose([inst] * 5)


def test_sequential_marginals_single():
    inst = luders_z()
    [marg] = sequential_marginals([inst])
    povm = induced_observable(inst)
    for lab in povm.space.labels:
        assert np.array_equal(marg.effect(lab), povm.effect(lab))


def test_sequential_marginals_match_composite_marginals():
    gen = np.random.default_rng(19)
    for _ in range(10):
        insts = [random_instrument(gen, 2, 2, 1) for _ in range(3)]
        margs = sequential_marginals(insts)
        joint = induced_observable(compose(insts))
        for i in range(3):
            ref = marginal_observable(joint, i)
            for lab in insts[i].space.labels:
                assert np.abs(margs[i].effect(lab) - ref.effect(lab)).max() <= 1e-10


def test_sequential_marginal_heisenberg_evolved():
    gen = np.random.default_rng(23)
    u = random_unitary(gen, 2)
    seq = [unitary_instrument(u), luders_z(), unitary_instrument(u)]
    margs = sequential_marginals(seq)
    # oracle: dual chain by hand; the pointer step sees the u-evolved projectors
    for lab, proj in (("0", np.diag([1.0, 0.0])), ("1", np.diag([0.0, 1.0]))):
        expected = u.conj().T @ proj @ u
        assert np.abs(margs[1].effect(lab) - expected).max() <= 1e-10


def test_sequential_marginals_commuting_diagonal():
    a = noisy_readout(0.8)
    b = noisy_readout(0.7)
    margs = sequential_marginals([a, b])
    for inst, marg in zip((a, b), margs):
        ref = induced_observable(inst)
        for lab in inst.space.labels:
            assert np.abs(marg.effect(lab) - ref.effect(lab)).max() <= 1e-10


def test_joint_observable_commuting_diagonal():
    a = noisy_readout(0.8)
    b = noisy_readout(0.7)
    joint = joint_observable_commuting([a, b])
    ea = induced_observable(a)
    eb = induced_observable(b)
    for la in ("0", "1"):
        for lb in ("0", "1"):
            prod = ea.effect(la) @ eb.effect(lb)
            assert np.abs(joint.effect(f"{la},{lb}") - prod).max() <= 1e-10


def test_joint_observable_idempotent_luders():
    joint = joint_observable_commuting([luders_z(), luders_z()])
    assert np.abs(joint.effect("0,0") - np.diag([1.0, 0.0])).max() <= 1e-12
    assert np.abs(joint.effect("0,1")).max() <= 1e-12
    assert np.abs(joint.effect("1,0")).max() <= 1e-12


def test_joint_observable_noncommuting_rejected():
    with pytest.raises(NotCommuting):
        joint_observable_commuting([luders_z(), luders_x()])


def test_dilate_unitary_channel():
    gen = np.random.default_rng(31)
    u = random_unitary(gen, 2)
    meas = dilate(unitary_instrument(u))
    assert meas.ancilla_dim == 1
    assert np.abs(meas.unitary - u).max() <= 1e-12


def test_dilate_luders_reconstruction():
    inst = luders_z()
    meas = dilate(inst)
    assert meas.ancilla_dim == 2
    for lab in ("0", "1"):
        for a in (np.eye(2), PAULI_Z, np.array([[0, 1], [1, 0]], dtype=complex)):
            ref = dual_apply(inst, [lab], a)
            assert np.abs(meas.dual_effect(a, lab) - ref).max() <= 1e-10


def test_dilate_isometry_and_reconstruction_random():
    gen = np.random.default_rng(37)
    for _ in range(20):
        d = int(gen.integers(2, 4))
        inst = random_instrument(gen, d, int(gen.integers(1, 4)), int(gen.integers(1, 3)))
        meas = dilate(inst)
        u = meas.unitary
        assert np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() <= 1e-10
        for lab in inst.space.labels:
            for i in range(d):
                for j in range(d):
                    e = np.zeros((d, d), dtype=complex)
                    e[i, j] = 1.0
                    ref = dual_apply(inst, [lab], e)
                    assert np.abs(meas.dual_effect(e, lab) - ref).max() <= 1e-8


def test_dilate_reconstruct_identity_on_actions():
    gen = np.random.default_rng(41)
    inst = random_instrument(gen, 2, 3, 2)
    rebuilt = dilate(inst).instrument()
    rho = random_density_matrix(gen, 2)
    for lab in inst.space.labels:
        assert (
            np.abs(
                apply_on_event(inst, [lab], rho) - apply_on_event(rebuilt, [lab], rho)
            ).max()
            <= 1e-8
        )


def test_statistically_equivalent_self():
    inst = luders_z()
    meas = dilate(inst)
    assert statistically_equivalent(meas, meas)


def test_statistically_equivalent_under_completion_rotation():
    from qbinfer.instruments import IndirectMeasurement

    inst = luders_z()
    meas = dilate(inst)
    # rotate the unused completion block: any unitary acting only on the
    # complement of the range of psi x e0 leaves the dual action unchanged
    dim = meas.unitary.shape[0]
    d = meas.system_dim
    m = meas.ancilla_dim
    fixed = [j * m for j in range(d)]
    free = [c for c in range(dim) if c not in fixed]
    u2 = meas.unitary.copy()
    theta = 0.7
    rot = np.array(
        [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]], dtype=complex
    )
    u2[:, free] = u2[:, free] @ rot
    other = IndirectMeasurement(m, meas.ancilla_state, u2, meas.pointer)
    assert statistically_equivalent(meas, other)


def test_statistically_equivalent_incompatible_spaces():
    from qbinfer.errors import IncompatibleOutcomeSpaces

    with pytest.raises(IncompatibleOutcomeSpaces):
        statistically_equivalent(dilate(luders_z()), dilate(luders_x()))


def test_dilate_requires_square():
    from qbinfer.errors import DimensionMismatch

    gen = np.random.default_rng(43)
    rect = random_instrument(gen, 2, 2, 1, dim_out=3)
    with pytest.raises(DimensionMismatch):
        dilate(rect)


def test_statistically_equivalent_distinguishes():
    a = dilate(luders_z())
    z_relabelled = KrausInstrument(
        2,
        2,
        OutcomeSpace(("+", "-")),
        {"+": [np.diag([1.0, 0.0]).astype(complex)], "-": [np.diag([0.0, 1.0]).astype(complex)]},
    )
    b = dilate(luders_x())
    bz = dilate(z_relabelled)
    assert not statistically_equivalent(bz, b)
