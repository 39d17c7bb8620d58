import numpy as np
import pytest

from elcrf.data import (
    SYNTH_LABELS,
    SyntheticTaskSpec,
    TokenSequence,
    generate_synthetic,
    read_conll,
    validate_iob,
    write_conll,
)
from elcrf.model import CONLL_LABELS


class TestReadConll:
    def write(self, tmp_path, text):
        path = tmp_path / "corpus.conll"
        path.write_text(text, encoding="utf-8")
        return path

    def test_basic_sentence(self, tmp_path):
        path = self.write(
            tmp_path, "EU NNP I-NP I-ORG\nrejects VBZ I-VP O\n\n"
        )
        seqs = read_conll(path)
        assert len(seqs) == 1
        assert seqs[0].tokens == ("EU", "rejects")
        assert seqs[0].labels == ("I-ORG", "O")

    def test_docstart_dropped(self, tmp_path):
        path = self.write(tmp_path, "-DOCSTART- -X- O O\n\n-DOCSTART- -X- O O\n\n")
        assert read_conll(path) == []

    def test_blank_line_runs(self, tmp_path):
        path = self.write(tmp_path, "a _ _ O\n\n\n\nb _ _ O\n\n")
        seqs = read_conll(path)
        assert [s.tokens for s in seqs] == [("a",), ("b",)]

    def test_inconsistent_columns(self, tmp_path):
        path = self.write(tmp_path, "a _ O\nb O\n\n")
        with pytest.raises(ValueError):
            read_conll(path)

    def test_unknown_label(self, tmp_path):
        path = self.write(tmp_path, "a _ _ I-WAT\n\n")
        with pytest.raises(ValueError):
            read_conll(path, label_set=CONLL_LABELS)

    def test_single_column_is_unlabeled(self, tmp_path):
        path = self.write(tmp_path, "a\nb\n\n")
        seqs = read_conll(path)
        assert seqs[0].labels is None

    def test_round_trip(self, tmp_path):
        corpus = generate_synthetic(SyntheticTaskSpec(seed=3), 20)
        path = tmp_path / "rt.conll"
        write_conll(corpus, path)
        assert read_conll(path) == corpus


class TestValidateIob:
    def test_plain_spans_valid(self):
        assert validate_iob(["I-PER", "I-PER", "O"], CONLL_LABELS) == []

    def test_b_without_preceding_span(self):
        violations = validate_iob(["O", "B-LOC"], CONLL_LABELS)
        assert len(violations) == 1
        assert violations[0][0] == 1

    def test_adjacent_spans_valid(self):
        assert validate_iob(["I-LOC", "B-LOC", "I-LOC"], CONLL_LABELS) == []

    def test_b_at_start_invalid(self):
        assert len(validate_iob(["B-ORG"], CONLL_LABELS)) == 1

    def test_b_after_different_type_invalid(self):
        assert len(validate_iob(["I-PER", "B-LOC"], CONLL_LABELS)) == 1

    def test_unknown_label_raises(self):
        with pytest.raises(ValueError):
            validate_iob(["I-XYZ"], CONLL_LABELS)


class TestGenerateSynthetic:
    def test_deterministic(self):
        spec = SyntheticTaskSpec(seed=7)
        assert generate_synthetic(spec, 50) == generate_synthetic(spec, 50)

    def test_different_seeds_differ(self):
        a = generate_synthetic(SyntheticTaskSpec(seed=1), 50)
        b = generate_synthetic(SyntheticTaskSpec(seed=2), 50)
        assert a != b

    def test_labeling_rule(self):
        # hand-check every generated sequence against the rule:
        # x strictly between ( and ) is I-MISC, everything else O
        spec = SyntheticTaskSpec(seed=9)
        for seq in generate_synthetic(spec, 200):
            inside = False
            for tok, lab in zip(seq.tokens, seq.labels):
                if tok == "(":
                    assert not inside  # markers never nest
                    inside = True
                    assert lab == "O"
                elif tok == ")":
                    assert inside
                    inside = False
                    assert lab == "O"
                elif tok == "x":
                    assert lab == ("I-MISC" if inside else "O")
                else:
                    assert lab == "O"
            assert not inside  # all pairs closed

    def test_all_sequences_pass_iob(self):
        for seq in generate_synthetic(SyntheticTaskSpec(seed=4), 100):
            assert validate_iob(list(seq.labels), SYNTH_LABELS) == []

    def test_x_rate_within_binomial_bound(self):
        spec = SyntheticTaskSpec(seed=12)
        corpus = generate_synthetic(spec, 2000)
        n_slots = n_x = 0
        for seq in corpus:
            for tok in seq.tokens:
                if tok in ("(", ")"):
                    continue
                n_slots += 1
                n_x += tok == "x"
        p = spec.x_prob
        sigma = np.sqrt(p * (1 - p) / n_slots)
        assert abs(n_x / n_slots - p) < 3 * sigma

    def test_infeasible_spec_rejected(self):
        with pytest.raises(ValueError):
            SyntheticTaskSpec(length_range=(4, 3))
        with pytest.raises(ValueError):
            SyntheticTaskSpec(length_range=(4, 8), pairs_range=(3, 3))
        with pytest.raises(ValueError):
            generate_synthetic(SyntheticTaskSpec(), 0)


class TestTokenSequence:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            TokenSequence(tokens=())

    def test_rejects_misaligned_labels(self):
        with pytest.raises(ValueError):
            TokenSequence(tokens=("a",), labels=("O", "O"))
