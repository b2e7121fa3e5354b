import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxfader.alignment import (
    FrameAlignment, LinguisticEmbeddingPair, Occurrence, PhonemeAlphabet, build_decompression, compress,
    decompress, phoneme_contrastive_loss, pseudo_contrastive_loss, read_alignment, write_alignment,
)
from voxfader.errors import DimensionError, DomainError, NormalizationError, ValidationError

from _gradcheck import central_differences, relative_error


def random_alignment(rng, max_n=8, max_dur=5, n_symbols=4):
    n = int(rng.integers(1, max_n + 1))
    return FrameAlignment.from_durations(rng.integers(0, n_symbols, n), rng.integers(1, max_dur + 1, n))


@st.composite
def alignments(draw, max_n=12, max_dur=6):
    n = draw(st.integers(1, max_n))
    durs = draw(st.lists(st.integers(1, max_dur), min_size=n, max_size=n))
    syms = draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
    return FrameAlignment.from_durations(syms, durs)


# ------------------------------------------------------------ oracles

def loop_pair_loss(A, B, m):
    """Double loop over the distance table of row-normalized A and B."""
    a = [row / np.sqrt(sum(x * x for x in row)) for row in A]
    b = [row / np.sqrt(sum(x * x for x in row)) for row in B]
    total = 0.0
    for i in range(len(a)):
        for j in range(len(b)):
            d = sum((a[i][k] - b[j][k]) ** 2 for k in range(len(a[i])))
            total += d if i == j else max(m - d, 0.0)
    return total


def loop_centroids(H, frame_symbols, symbols):
    out = []
    for s in symbols:
        rows = [H[t] / np.linalg.norm(H[t]) for t in range(len(H)) if frame_symbols[t] == s]
        out.append(sum(rows) / len(rows))
    return np.array(out)


class TestAlphabetAndAlignment:
    def test_duplicate_symbols(self):
        with pytest.raises(ValidationError):
            PhonemeAlphabet(("a", "b", "a"))

    def test_empty_alphabet(self):
        with pytest.raises(ValidationError):
            PhonemeAlphabet(())

    @pytest.mark.parametrize("seq", [
        [(0, 0, 1), (1, 3, 4)],   # gap
        [(0, 0, 2), (1, 2, 4)],   # overlap
        [(0, 1, 4)],              # does not start at 0
        [(0, 0, 1), (1, 3, 2)],   # negative duration
    ])
    def test_invalid_spans(self, seq):
        with pytest.raises(ValidationError):
            FrameAlignment(5, seq)

    def test_wrong_T(self):
        with pytest.raises(ValidationError):
            FrameAlignment(6, [(0, 0, 4)])


class TestDecompression:
    def test_single_occurrence(self):
        D = build_decompression(FrameAlignment(3, [(0, 0, 2)])).D
        np.testing.assert_array_equal(D, [[1, 1, 1]])

    def test_two_occurrences(self):
        D = build_decompression(FrameAlignment(3, [(0, 0, 1), (1, 2, 2)])).D
        np.testing.assert_array_equal(D, [[1, 1, 0], [0, 0, 1]])

    def test_repeated_symbol_rows_distinct(self):
        D = build_decompression(FrameAlignment(5, [(0, 0, 1), (1, 2, 2), (0, 3, 4)])).D
        np.testing.assert_array_equal(D[0], [1, 1, 0, 0, 0])
        np.testing.assert_array_equal(D[2], [0, 0, 0, 1, 1])

    def test_symbol_membership_variant(self):
        D = build_decompression(FrameAlignment(5, [(0, 0, 1), (1, 2, 2), (0, 3, 4)]), membership="symbol").D
        np.testing.assert_array_equal(D[0], [1, 1, 0, 1, 1])
        np.testing.assert_array_equal(D[0], D[2])

    def test_unknown_membership(self):
        with pytest.raises(ValidationError):
            build_decompression(FrameAlignment(1, [(0, 0, 0)]), membership="fuzzy")

    @given(alignments())
    def test_columns_sum_to_one_rows_nonempty(self, al):
        D = build_decompression(al).D
        assert np.all(D.sum(axis=0) == 1.0)
        assert np.all(D.sum(axis=1) >= 1.0)
        assert set(np.unique(D)) <= {0.0, 1.0}


class TestDecompressCompress:
    def test_single_occurrence_replicated(self):
        D = build_decompression(FrameAlignment(3, [(0, 0, 2)]))
        np.testing.assert_array_equal(decompress(np.array([[1.0, 2.0]]), D), [[1, 2]] * 3)

    def test_unit_durations_identity(self):
        rng = np.random.default_rng(0)
        H = rng.normal(size=(4, 3))
        D = build_decompression(FrameAlignment.from_durations([0, 1, 2, 3], [1, 1, 1, 1]))
        np.testing.assert_array_equal(decompress(H, D), H)

    def test_matches_lookup_oracle(self):
        rng = np.random.default_rng(1)
        al = FrameAlignment.from_durations([2, 0, 1], [3, 1, 3])
        H = rng.normal(size=(3, 5))
        out = decompress(H, build_decompression(al))
        for t in range(al.T):
            owner = next(n for n, o in enumerate(al.sequence) if o.start <= t <= o.end)
            assert out[t].tobytes() == H[owner].tobytes()

    def test_constant_rows(self):
        al = FrameAlignment.from_durations([0, 1], [2, 3])
        v = np.array([0.25, -4.0])
        np.testing.assert_array_equal(compress(np.tile(v, (5, 1)), build_decompression(al)), [v, v])

    def test_two_point_mean(self):
        al = FrameAlignment(2, [(0, 0, 1)])
        np.testing.assert_array_equal(compress(np.array([[0.0, 0.0], [2.0, 4.0]]), build_decompression(al)), [[1, 2]])

    def test_shape_errors(self):
        D = build_decompression(FrameAlignment(3, [(0, 0, 2)]))
        with pytest.raises(DimensionError):
            decompress(np.ones((2, 2)), D)
        with pytest.raises(DimensionError):
            compress(np.ones((4, 2)), D)

    @pytest.mark.parametrize("seed", range(100))
    def test_round_trip_exact(self, seed):
        rng = np.random.default_rng(seed)
        N = int(rng.integers(1, 17))
        durations = np.ones(N, dtype=int)
        extra = int(rng.integers(0, 64 - N + 1))
        np.add.at(durations, rng.integers(0, N, extra), 1)
        al = FrameAlignment.from_durations(rng.integers(0, 5, N), durations)
        assert al.T <= 64
        D = build_decompression(al)
        H = rng.normal(size=(N, 4))
        np.testing.assert_array_equal(compress(decompress(H, D), D), H)

    @given(alignments(), st.integers(0, 2**32 - 1))
    def test_compress_is_idempotent_projection(self, al, seed):
        rng = np.random.default_rng(seed)
        D = build_decompression(al)
        H = rng.normal(size=(al.T, 3))
        once = compress(H, D)
        np.testing.assert_allclose(compress(decompress(once, D), D), once, rtol=0, atol=1e-12)

    def test_permuting_within_occurrence(self):
        rng = np.random.default_rng(3)
        al = FrameAlignment.from_durations([0, 1, 2], [4, 2, 3])
        D = build_decompression(al)
        H = rng.normal(size=(al.T, 3))
        perm = np.arange(al.T)
        perm[0:4] = perm[0:4][::-1]
        np.testing.assert_allclose(compress(H[perm], D), compress(H, D), rtol=0, atol=1e-12)


class TestPseudoContrastive:
    def test_single_identical_row(self):
        u = np.array([[0.3, -0.2, 0.9]])
        assert pseudo_contrastive_loss(LinguisticEmbeddingPair(u, u)).loss == 0.0

    def test_orthonormal_pair(self):
        e = np.eye(2)
        assert pseudo_contrastive_loss(LinguisticEmbeddingPair(e, e, 1.0)).loss == 0.0

    def test_antipodal(self):
        u = np.array([[0.6, 0.8]])
        assert pseudo_contrastive_loss(LinguisticEmbeddingPair(u, -u)).loss == pytest.approx(4.0, abs=1e-15)

    def test_zero_row(self):
        with pytest.raises(NormalizationError):
            pseudo_contrastive_loss(LinguisticEmbeddingPair(np.zeros((1, 2)), np.ones((1, 2))))

    def test_bad_margin_and_shape(self):
        with pytest.raises(DomainError):
            LinguisticEmbeddingPair(np.ones((1, 2)), np.ones((1, 2)), margin=0.0)
        with pytest.raises(DimensionError):
            LinguisticEmbeddingPair(np.ones((2, 2)), np.ones((3, 2)))

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_double_loop(self, seed):
        rng = np.random.default_rng(seed)
        T, d = int(rng.integers(1, 9)), int(rng.integers(2, 6))
        A, B = rng.normal(size=(T, d)), rng.normal(size=(T, d))
        m = float(rng.uniform(0.2, 3.0))
        assert abs(pseudo_contrastive_loss(LinguisticEmbeddingPair(A, B, m)).loss - loop_pair_loss(A, B, m)) < 1e-12

    def test_gradients_finite_differences(self):
        rng = np.random.default_rng(21)
        A, B = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        res = pseudo_contrastive_loss(LinguisticEmbeddingPair(A, B, 1.5))
        num_a = central_differences(lambda X: loop_pair_loss(X, B, 1.5), A)
        num_b = central_differences(lambda X: loop_pair_loss(A, X, 1.5), B)
        assert relative_error(res.grad_r, num_a).max() < 1e-4
        assert relative_error(res.grad_t, num_b).max() < 1e-4

    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    @settings(max_examples=50)
    def test_non_negative(self, T, seed):
        rng = np.random.default_rng(seed)
        pair = LinguisticEmbeddingPair(rng.normal(size=(T, 3)) + 0.01, rng.normal(size=(T, 3)) + 0.01)
        assert pseudo_contrastive_loss(pair).loss >= 0.0


class TestPhonemeContrastive:
    def test_one_symbol_constant(self):
        H = np.tile([0.2, 0.5, -0.1], (4, 1))
        al = FrameAlignment(4, [(0, 0, 3)])
        assert phoneme_contrastive_loss(H, H, al, PhonemeAlphabet(("a",))).loss == 0.0

    def test_two_orthonormal_symbols(self):
        H = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        al = FrameAlignment(3, [(0, 0, 1), (1, 2, 2)])
        assert phoneme_contrastive_loss(H, H, al, PhonemeAlphabet(("a", "b")), 1.0).loss == 0.0

    def test_absent_symbol_reported(self):
        H = np.random.default_rng(0).normal(size=(3, 2))
        al = FrameAlignment(3, [(0, 0, 1), (2, 2, 2)])
        res = phoneme_contrastive_loss(H, H, al, PhonemeAlphabet(("a", "b", "c")))
        assert res.diagnostics["excluded"] == ("b",)
        assert res.diagnostics["symbols"] == ("a", "c")

    def test_frame_count_mismatch(self):
        with pytest.raises(DimensionError):
            phoneme_contrastive_loss(np.ones((3, 2)), np.ones((3, 2)), FrameAlignment(2, [(0, 0, 1)]),
                                     PhonemeAlphabet(("a",)))

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_table_oracle(self, seed):
        rng = np.random.default_rng(500 + seed)
        T, P = 6, 3
        frame_sym = rng.integers(0, P, T)
        durations, symbols = [], []
        for s in frame_sym:
            if symbols and symbols[-1] == s:
                durations[-1] += 1
            else:
                symbols.append(int(s))
                durations.append(1)
        al = FrameAlignment.from_durations(symbols, durations)
        A, B = rng.normal(size=(T, 4)), rng.normal(size=(T, 4))
        present = sorted(set(frame_sym.tolist()))
        m = float(rng.uniform(0.5, 2.0))
        expected = loop_pair_loss(loop_centroids(A, frame_sym, present), loop_centroids(B, frame_sym, present), m)
        got = phoneme_contrastive_loss(A, B, al, PhonemeAlphabet(("a", "b", "c")), m).loss
        assert abs(got - expected) < 1e-12

    def test_gradients_finite_differences(self):
        rng = np.random.default_rng(4)
        al = FrameAlignment.from_durations([0, 1, 0, 2], [2, 3, 1, 2])
        A, B = rng.normal(size=(al.T, 3)), rng.normal(size=(al.T, 3))
        alphabet = PhonemeAlphabet(("a", "b", "c"))
        res = phoneme_contrastive_loss(A, B, al, alphabet, 1.2)
        num_a = central_differences(lambda X: phoneme_contrastive_loss(X, B, al, alphabet, 1.2).loss, A)
        num_b = central_differences(lambda X: phoneme_contrastive_loss(A, X, al, alphabet, 1.2).loss, B)
        assert relative_error(res.grad_r, num_a).max() < 1e-4
        assert relative_error(res.grad_t, num_b).max() < 1e-4


class TestAlignmentFile:
    def test_round_trip(self, tmp_path):
        alphabet = PhonemeAlphabet(("sil", "ah", "t"))
        al = FrameAlignment.from_durations([0, 1, 2, 0], [3, 2, 1, 4])
        write_alignment(tmp_path / "a.txt", al, alphabet)
        assert (tmp_path / "a.txt").read_text().splitlines()[0] == "sil 0 2"
        al2, alpha2 = read_alignment(tmp_path / "a.txt", alphabet)
        assert al2 == al and alpha2 == alphabet

    def test_inferred_alphabet(self, tmp_path):
        (tmp_path / "a.txt").write_text("b 0 0\na 1 3\nb 4 4\n")
        al, alphabet = read_alignment(tmp_path / "a.txt")
        assert alphabet.symbols == ("b", "a")
        assert al.sequence == (Occurrence(0, 0, 0), Occurrence(1, 1, 3), Occurrence(0, 4, 4))

    @pytest.mark.parametrize("text", ["a 0 1\nb 3 4\n", "a 0\n", "a x 1\n", ""])
    def test_invalid_files(self, tmp_path, text):
        (tmp_path / "a.txt").write_text(text)
        with pytest.raises(ValidationError):
            read_alignment(tmp_path / "a.txt")

    def test_unknown_symbol(self, tmp_path):
        (tmp_path / "a.txt").write_text("z 0 1\n")
        with pytest.raises(ValidationError):
            read_alignment(tmp_path / "a.txt", PhonemeAlphabet(("a",)))
