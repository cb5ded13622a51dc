"""Moment matrices, QR filters, and the assembled samplet transform."""

import numpy as np
import pytest
from scipy import sparse

from samplets import (
    GaussianSimilarity,
    InputError,
    SupportBox,
    build_cluster_tree,
    build_samplet_basis,
    cluster_filters,
    dirac,
    evaluate,
    forward_transform,
    generate_example,
    inverse_transform,
    moment_dimension,
    moment_matrix,
    primitive_basis,
    threshold_compress,
    transform_matrix,
    verify_vanishing_moments,
)
from samplets.ctree import ClusterNode, ClusterTree
from samplets.measures import Polynomial, analysis_vector


@pytest.fixture(scope="module")
def small_case():
    """48 random Diracs in the plane with a degree-1 basis."""
    functionals, _ = generate_example("random-diracs", 48, 2, seed=21)
    tree = build_cluster_tree(functionals, GaussianSimilarity(0.3), 8, moment_dim=3)
    basis = build_samplet_basis(functionals, tree, 1)
    return functionals, tree, basis


class TestMomentMatrix:
    def test_three_diracs_against_constant_and_linear(self):
        functionals = [dirac(i, [x]) for i, x in enumerate([0.0, 0.5, 1.0])]
        prim = primitive_basis(1, 1)  # unscaled monomials 1, t
        mom = moment_matrix(functionals, prim)
        assert mom.values.tolist() == [[1.0, 1.0, 1.0], [0.0, 0.5, 1.0]]

    def test_constant_row_is_all_ones_for_unit_diracs(self):
        functionals = [dirac(i, [x]) for i, x in enumerate(np.linspace(0, 1, 7))]
        mom = moment_matrix(functionals, primitive_basis(1, 2))
        assert np.array_equal(mom.values[0], np.ones(7))

    def test_weights_fill_the_constant_row(self):
        from samplets import Atom, Functional

        functionals = [
            Functional(0, [Atom([0.1], 2.0, [0])]),
            Functional(1, [Atom([0.9], -2.0, [0])]),
        ]
        mom = moment_matrix(functionals, primitive_basis(1, 0))
        assert mom.values.tolist() == [[2.0, -2.0]]

    def test_cluster_node_form_needs_functionals(self):
        node = ClusterNode(np.array([0, 1]), 0, SupportBox([0.0], [1.0]))
        with pytest.raises(InputError):
            moment_matrix(node, primitive_basis(1, 1))


class TestClusterFilters:
    def test_three_dirac_haar_filter(self):
        functionals = [dirac(i, [x]) for i, x in enumerate([0.0, 0.5, 1.0])]
        flt = cluster_filters(moment_matrix(functionals, primitive_basis(1, 0)))
        assert np.allclose(flt.q_phi.ravel(), np.full(3, 1.0 / np.sqrt(3.0)))
        # every samplet column is orthogonal to constants: zero entry sum
        assert np.abs(flt.q_psi.sum(axis=0)).max() <= 1e-14
        assert flt.m_phi == 1 and flt.n_samplets == 2
        assert np.allclose(flt.r, [[np.sqrt(3.0)]])

    def test_square_case_yields_no_samplets(self):
        functionals = [dirac(0, [0.0]), dirac(1, [1.0])]
        flt = cluster_filters(moment_matrix(functionals, primitive_basis(1, 1)))
        assert flt.n_samplets == 0
        assert flt.q_psi.shape == (2, 0)

    def test_orthogonality_and_triangular_identity(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            m_p, n = int(rng.integers(1, 6)), int(rng.integers(1, 12))
            vals = rng.normal(size=(m_p, n))
            flt = cluster_filters(vals)
            q = flt.q
            assert np.allclose(q.T @ q, np.eye(n), atol=1e-12)
            rmin = min(m_p, n)
            assert flt.m_phi == rmin
            # M Q_phi reproduces the transposed triangular factor, M Q_psi = 0
            assert np.allclose(vals @ flt.q_phi, flt.r.T, atol=1e-12)
            if flt.n_samplets:
                assert np.abs(vals @ flt.q_psi).max() <= 1e-12
            assert (np.diag(flt.r)[: rmin] >= 0.0).all()

    def test_deterministic_filters(self):
        vals = np.random.default_rng(5).normal(size=(3, 9))
        a, b = cluster_filters(vals), cluster_filters(vals)
        assert np.array_equal(a.q, b.q) and np.array_equal(a.r, b.r)


class TestBuildSampletBasis:
    def test_haar_count_on_eight_diracs(self):
        functionals, _ = generate_example("uniform-diracs", 8)
        tree = build_cluster_tree(functionals, GaussianSimilarity(0.5), 2, moment_dim=1)
        basis = build_samplet_basis(functionals, tree, 0)
        assert basis.n_samplets == 7
        assert basis.n_scaling == 1
        u = basis.to_dense()
        assert np.abs(u @ u.T - np.eye(8)).max() <= 1e-12

    def test_square_root_cluster_emits_only_scaling_rows(self):
        # N equal to the moment dimension: the whole basis is scaling rows
        functionals = [dirac(i, [x]) for i, x in enumerate([0.0, 0.5, 1.0])]
        root = ClusterNode(np.arange(3), 0, SupportBox([0.0], [1.0]))
        tree = ClusterTree.finalize(root)
        basis = build_samplet_basis(functionals, tree, 2)  # m_P = 3 = N
        assert basis.n_samplets == 0
        assert basis.n_scaling == 3
        u = basis.to_dense()
        assert np.abs(u @ u.T - np.eye(3)).max() <= 1e-12
        assert verify_vanishing_moments(basis, functionals) == 0.0

    def test_leaf_smaller_than_moment_dimension_rejected(self):
        functionals = [dirac(i, [x]) for i, x in enumerate([0.0, 0.5, 1.0])]
        root = ClusterNode(np.arange(3), 0, SupportBox([0.0], [1.0]))
        tree = ClusterTree.finalize(root)
        with pytest.raises(InputError):
            build_samplet_basis(functionals, tree, 3)  # m_P = 4 > 3

    def test_telescoping_row_count(self, small_case):
        functionals, tree, basis = small_case
        per_node = sum(basis.filters[nd.node_id].n_samplets for nd in tree.nodes)
        assert per_node == basis.n_samplets
        assert basis.n_samplets + basis.n_scaling == len(functionals)
        assert basis.n_scaling == moment_dimension(2, 1)

    def test_orthogonality_small(self, small_case):
        _, _, basis = small_case
        u = basis.to_dense()
        assert np.abs(u @ u.T - np.eye(basis.n)).max() <= 1e-10
        assert np.abs(u.T @ u - np.eye(basis.n)).max() <= 1e-10

    def test_round_trip_small(self, small_case):
        _, _, basis = small_case
        rng = np.random.default_rng(0)
        x = rng.normal(size=basis.n)
        back = basis.inverse(basis.forward(x))
        assert np.abs(back - x).max() <= 1e-10 * np.abs(x).max()

    def test_norm_preservation(self, small_case):
        _, _, basis = small_case
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.normal(size=basis.n)
            assert np.linalg.norm(basis.forward(x)) == pytest.approx(
                np.linalg.norm(x), rel=1e-12
            )

    def test_matrix_arguments_transform_columnwise(self, small_case):
        _, _, basis = small_case
        rng = np.random.default_rng(2)
        block = rng.normal(size=(basis.n, 6))
        together = basis.forward(block)
        for j in range(6):
            assert np.allclose(together[:, j], basis.forward(block[:, j]), atol=1e-13)

    def test_wrong_length_rejected(self, small_case):
        _, _, basis = small_case
        with pytest.raises(InputError):
            basis.forward(np.zeros(basis.n + 1))
        with pytest.raises(InputError):
            basis.inverse(np.zeros(basis.n - 1))

    def test_module_level_wrappers(self, small_case):
        _, _, basis = small_case
        x = np.linspace(0.0, 1.0, basis.n)
        assert np.array_equal(forward_transform(basis, x), basis.forward(x))
        assert np.array_equal(inverse_transform(basis, x), basis.inverse(x))


class TestVanishingMoments:
    def test_polynomial_data_is_annihilated(self, small_case):
        functionals, tree, basis = small_case
        rng = np.random.default_rng(7)
        prim = basis.primitives
        coeffs = rng.normal(size=prim.size)
        p = Polynomial(prim.exponents, coeffs, prim.center, prim.scale)
        x = analysis_vector(functionals, p)
        c = basis.forward(x)
        assert np.abs(c[: basis.n_samplets]).max() <= 1e-10 * np.linalg.norm(x)

    def test_residual_below_tolerance(self, small_case):
        functionals, _, basis = small_case
        assert verify_vanishing_moments(basis, functionals) <= 1e-9

    def test_negative_control_against_higher_degree(self):
        functionals, _ = generate_example("random-diracs", 64, 1, seed=3)
        tree = build_cluster_tree(functionals, GaussianSimilarity(0.2), 8, moment_dim=2)
        basis = build_samplet_basis(functionals, tree, 1)
        higher = primitive_basis(1, 2, tree.root.box)
        assert verify_vanishing_moments(basis, functionals, higher) >= 1e-4

    def test_moment_propagation_matches_direct_evaluation(self, small_case):
        # the internal moment matrices are accumulated through exact
        # change-of-basis transfers; rebuild each one directly from raw
        # functionals and check M Q_phi = R^T and M Q_psi = 0
        functionals, tree, basis = small_case
        for nd in tree.nodes:
            prim = primitive_basis(basis.dimension, basis.degree, nd.box)
            if nd.is_leaf:
                cols = [(np.array([i]), np.array([1.0])) for i in nd.indices]
            else:
                cols = []
                for ch in nd.children:
                    idx, rows = basis.scaling_rows(ch.node_id)
                    cols.extend((idx, rows[k]) for k in range(rows.shape[0]))
            direct = np.zeros((prim.size, len(cols)))
            for a, p in enumerate(prim.elements):
                pairings = np.array([evaluate(functionals[i], p) for i in range(len(functionals))])
                for b, (idx, wts) in enumerate(cols):
                    direct[a, b] = wts @ pairings[idx]
            flt = basis.filters[nd.node_id]
            scale = max(np.abs(direct).max(), 1.0)
            assert np.abs(direct @ flt.q_phi - flt.r.T).max() <= 1e-10 * scale
            if flt.n_samplets:
                assert np.abs(direct @ flt.q_psi).max() <= 1e-10 * scale


class TestRowAccessAndMetadata:
    def test_samplet_rows_match_the_dense_matrix(self, small_case):
        _, _, basis = small_case
        u = basis.to_dense()
        for i in range(basis.n_samplets):
            idx, vals = basis.samplet_row(i)
            row = np.zeros(basis.n)
            row[idx] = vals
            assert np.allclose(row, u[i], atol=1e-12)

    def test_rows_are_localized_to_their_cluster(self, small_case):
        _, tree, basis = small_case
        for i in range(basis.n_samplets):
            idx, vals = basis.samplet_row(i)
            owner = tree.nodes[int(basis.samplet_clusters[i])]
            assert set(idx.tolist()) <= set(owner.indices.tolist())
            assert len(idx) <= owner.size
            assert np.linalg.norm(vals) == pytest.approx(1.0, rel=1e-12)

    def test_levels_are_sorted_coarse_to_fine(self, small_case):
        _, _, basis = small_case
        levels = basis.samplet_levels
        assert (np.diff(levels) >= 0).all()

    def test_metadata_boxes_are_the_cluster_boxes(self, small_case):
        _, tree, basis = small_case
        for i in range(basis.n_samplets):
            owner = tree.nodes[int(basis.samplet_clusters[i])]
            assert np.array_equal(basis.samplet_box_lo[i], owner.box.lower)
            assert np.array_equal(basis.samplet_box_hi[i], owner.box.upper)

    def test_cluster_ranges_partition_the_samplets(self, small_case):
        _, tree, basis = small_case
        covered = np.zeros(basis.n_samplets, dtype=bool)
        for nd in tree.nodes:
            start, stop = basis.cluster_samplet_range(nd.node_id)
            assert not covered[start:stop].any()
            covered[start:stop] = True
        assert covered.all()

    def test_scaling_rows_are_orthonormal(self, small_case):
        _, tree, basis = small_case
        idx, rows = basis.scaling_rows(tree.root.node_id)
        assert rows.shape == (basis.n_scaling, basis.n)
        assert np.allclose(rows @ rows.T, np.eye(basis.n_scaling), atol=1e-12)
        u = basis.to_dense()
        assert np.allclose(rows, u[basis.n_samplets:][:, idx], atol=1e-12)

    def test_row_index_out_of_range(self, small_case):
        _, _, basis = small_case
        with pytest.raises(InputError):
            basis.samplet_row(basis.n_samplets)


class TestTransformMatrix:
    def test_identity_is_preserved(self, small_case):
        _, _, basis = small_case
        out = transform_matrix(basis, np.eye(basis.n))
        assert np.abs(out - np.eye(basis.n)).max() <= 1e-10

    def test_rank_one_covariance(self, small_case):
        _, _, basis = small_case
        rng = np.random.default_rng(4)
        x = rng.normal(size=basis.n)
        out = transform_matrix(basis, np.outer(x, x))
        ux = basis.forward(x)
        assert np.allclose(out, np.outer(ux, ux), atol=1e-10)

    def test_symmetry_required_and_preserved(self, small_case):
        _, _, basis = small_case
        rng = np.random.default_rng(5)
        a = rng.normal(size=(basis.n, basis.n))
        with pytest.raises(InputError):
            transform_matrix(basis, a)
        sym = (a + a.T) / 2
        out = transform_matrix(basis, sym)
        assert np.abs(out - out.T).max() <= 1e-10


class TestThresholdCompress:
    def test_zero_sigma_keeps_everything(self):
        rng = np.random.default_rng(6)
        mat = rng.normal(size=(20, 20))
        compressed, report = threshold_compress(mat, 0.0)
        assert sparse.issparse(compressed)
        assert np.array_equal(compressed.toarray(), mat)
        assert report.kept == 400
        assert report.kept_fraction == 1.0
        assert report.dropped_norm == 0.0

    def test_sigma_above_one_drops_everything(self):
        rng = np.random.default_rng(7)
        mat = rng.normal(size=(10, 10))
        compressed, report = threshold_compress(mat, 1.5)
        assert compressed.nnz == 0
        assert report.kept == 0
        assert report.dropped_norm == pytest.approx(np.linalg.norm(mat))

    def test_vector_input_stays_dense(self):
        vec = np.array([1.0, -0.5, 1e-9, 0.25])
        compressed, report = threshold_compress(vec, 1e-6)
        assert isinstance(compressed, np.ndarray)
        assert compressed.tolist() == [1.0, -0.5, 0.0, 0.25]
        assert report.kept == 3

    def test_negative_sigma_rejected(self):
        with pytest.raises(InputError):
            threshold_compress(np.ones(3), -0.1)


class TestBackends:
    def test_numpy_and_numba_agree(self, small_case):
        from samplets import kernels

        if not kernels.HAS_NUMBA:
            pytest.skip("numba is not installed")
        _, _, basis = small_case
        rng = np.random.default_rng(9)
        x = rng.normal(size=basis.n)
        try:
            kernels.set_backend("numpy")
            fwd_np = basis.forward(x)
            inv_np = basis.inverse(x)
            kernels.set_backend("numba")
            fwd_nb = basis.forward(x)
            inv_nb = basis.inverse(x)
        finally:
            kernels.set_backend("auto")
        assert np.allclose(fwd_np, fwd_nb, atol=1e-13)
        assert np.allclose(inv_np, inv_nb, atol=1e-13)

    def test_unknown_backend_rejected(self):
        from samplets import kernels

        with pytest.raises(InputError):
            kernels.set_backend("fortran")
        assert kernels.get_backend() in ("auto", "numba", "numpy")
