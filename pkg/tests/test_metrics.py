from __future__ import annotations

import json
import random
import sys
from collections import Counter

import pytest

from causaltext.errors import AdapterError, MetricError
from causaltext.graph import Component, Polarity
from causaltext.metrics import (
    MetricReport,
    PolarityLexicon,
    ScoredPair,
    aggregate,
    cohen_kappa,
    external_score,
    meteor_lite,
    polarity_accuracy,
    rouge_l,
    score_pair,
    tokenize,
)
from causaltext.metrics import _align
from causaltext.stemmer import stem

from helpers import brute_force_lcs


class TestTokenize:
    def test_lowercases_and_splits_punctuation(self):
        assert tokenize("Obesity falls, sharply!") == ["obesity", "falls", "sharply"]

    def test_unicode_normalized(self):
        assert tokenize("café CAFÉ") == ["café", "café"]

    def test_empty(self):
        assert tokenize("  .,;  ") == []


class TestRougeL:
    def test_identical_sentences_score_one(self):
        assert rouge_l("the cat sat", "the cat sat") == 1.0

    def test_disjoint_sentences_score_zero(self):
        assert rouge_l("alpha beta", "gamma delta") == 0.0

    def test_pinned_example(self):
        # LCS("the cat sat", "the cat") = 2 by brute force enumeration.
        assert brute_force_lcs(["the", "cat", "sat"], ["the", "cat"]) == 2
        assert rouge_l("the cat sat", "the cat") == pytest.approx(0.8)

    def test_empty_candidate_scores_zero(self):
        assert rouge_l("", "reference text") == 0.0

    def test_matches_brute_force_oracle_on_short_strings(self):
        rng = random.Random(13)
        words = ["a", "b", "c", "d", "e"]
        for _ in range(300):
            cand = [rng.choice(words) for _ in range(rng.randint(1, 12))]
            ref = [rng.choice(words) for _ in range(rng.randint(1, 12))]
            oracle = brute_force_lcs(cand, ref)
            lcs = oracle
            precision = lcs / len(cand)
            recall = lcs / len(ref)
            expected = (
                0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
            )
            assert rouge_l(" ".join(cand), " ".join(ref)) == pytest.approx(expected)

    def test_in_unit_interval(self):
        rng = random.Random(5)
        words = ["ab", "cd", "ef"]
        for _ in range(100):
            cand = " ".join(rng.choice(words) for _ in range(rng.randint(1, 10)))
            ref = " ".join(rng.choice(words) for _ in range(rng.randint(1, 10)))
            assert 0.0 <= rouge_l(cand, ref) <= 1.0


def _staged_budgets(cand, ref):
    """Independent restatement of the stage budgets for the oracle."""
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    k1 = {w: min(c, ref_counts[w]) for w, c in cand_counts.items() if ref_counts.get(w)}
    leftover_c: Counter = Counter()
    for w, c in cand_counts.items():
        rest = c - k1.get(w, 0)
        if rest:
            leftover_c[stem(w)] += rest
    leftover_r: Counter = Counter()
    for w, c in ref_counts.items():
        rest = c - k1.get(w, 0)
        if rest:
            leftover_r[stem(w)] += rest
    k2 = {s: min(c, leftover_r[s]) for s, c in leftover_c.items() if leftover_r.get(s)}
    return k1, k2


def exhaustive_min_chunks(cand, ref):
    """Oracle: enumerate every injective compatible matching, keep the
    stage-valid maximal ones, and minimize the chunk count."""
    k1, k2 = _staged_budgets(cand, ref)
    m = sum(k1.values()) + sum(k2.values())
    if m == 0:
        return 0, 0
    best = [None]

    def chunks_of(pairs):
        ordered = sorted(pairs)
        count = 0
        prev = None
        for ci, ri in ordered:
            if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
                count += 1
            prev = (ci, ri)
        return count

    def valid(pairs):
        exact = Counter()
        stemmed = Counter()
        for ci, ri in pairs:
            if cand[ci] == ref[ri]:
                exact[cand[ci]] += 1
            elif stem(cand[ci]) == stem(ref[ri]):
                stemmed[stem(cand[ci])] += 1
            else:
                return False
        return exact == Counter(k1) and stemmed == Counter(k2)

    used = set()

    def recurse(i, pairs):
        if i == len(cand):
            if len(pairs) == m and valid(pairs):
                c = chunks_of(pairs)
                if best[0] is None or c < best[0]:
                    best[0] = c
            return
        for j in range(len(ref)):
            if j in used:
                continue
            if cand[i] == ref[j] or stem(cand[i]) == stem(ref[j]):
                used.add(j)
                recurse(i + 1, pairs + [(i, j)])
                used.discard(j)
        recurse(i + 1, pairs)

    recurse(0, [])
    return m, best[0]


class TestMeteorLite:
    def test_identical_sentence_closed_form(self):
        for m in range(1, 12):
            sentence = " ".join(f"word{i}" for i in range(m))
            assert meteor_lite(sentence, sentence) == pytest.approx(1 - 0.5 / m**3, abs=1e-12)

    def test_zero_matches_scores_zero(self):
        assert meteor_lite("alpha beta", "gamma delta") == 0.0

    def test_pinned_half_match_example(self):
        # One exact match of two tokens each side; stems of the verbs differ.
        assert stem("falls") != stem("drops")
        assert meteor_lite("obesity falls", "obesity drops") == pytest.approx(0.25, abs=1e-12)

    def test_stemmed_stage_matches(self):
        # "increases" and "increasing" share a stem but differ as surfaces.
        score = meteor_lite("stress increases", "stress increasing")
        assert score == pytest.approx(1 - 0.5 / 8, abs=1e-12)  # m=2, chunks=1

    def test_chunk_minimization_matches_exhaustive_search(self):
        rng = random.Random(31)
        words = ["run", "runs", "running", "cat", "cats", "dog", "walked", "walking"]
        for _ in range(150):
            cand = [rng.choice(words) for _ in range(rng.randint(1, 8))]
            ref = [rng.choice(words) for _ in range(rng.randint(1, 8))]
            m, oracle_chunks = exhaustive_min_chunks(cand, ref)
            got_m, got_chunks = _align(cand, ref)
            assert got_m == m
            if m:
                assert got_chunks == oracle_chunks, (cand, ref)

    def test_in_unit_interval(self):
        rng = random.Random(77)
        words = ["up", "down", "rises", "rise", "fall", "falls"]
        for _ in range(100):
            cand = " ".join(rng.choice(words) for _ in range(rng.randint(1, 9)))
            ref = " ".join(rng.choice(words) for _ in range(rng.randint(1, 9)))
            assert 0.0 <= meteor_lite(cand, ref) <= 1.0

    def test_order_sensitivity_via_penalty(self):
        together = meteor_lite("a b c d", "a b c d")
        scrambled = meteor_lite("d c b a", "a b c d")
        assert scrambled < together


class TestCohenKappa:
    def test_perfect_agreement(self):
        assert cohen_kappa(["x", "y", "x"], ["x", "y", "x"]) == pytest.approx(1.0, abs=1e-12)

    def test_chance_level_agreement_is_zero(self):
        assert cohen_kappa(list("xxyy"), list("xyxy")) == pytest.approx(0.0, abs=1e-12)

    def test_systematic_disagreement_is_minus_one(self):
        assert cohen_kappa(["x", "y"], ["y", "x"]) == pytest.approx(-1.0, abs=1e-12)

    def test_single_category_both_sides(self):
        assert cohen_kappa(["x", "x"], ["x", "x"]) == 1.0

    def test_relabeling_invariance(self):
        rng = random.Random(3)
        for _ in range(50):
            n = rng.randint(2, 30)
            a = [rng.choice("pqr") for _ in range(n)]
            b = [rng.choice("pqr") for _ in range(n)]
            mapping = dict(zip("pqr", rng.sample("pqr", 3)))
            if len({*a, *b}) < 2:
                continue
            base = cohen_kappa(a, b)
            mapped = cohen_kappa([mapping[x] for x in a], [mapping[x] for x in b])
            assert mapped == pytest.approx(base, abs=1e-12)

    def test_length_mismatch_rejected(self):
        with pytest.raises(MetricError):
            cohen_kappa(["x"], ["x", "y"])

    def test_empty_rejected(self):
        with pytest.raises(MetricError):
            cohen_kappa([], [])


def _component(*triples):
    return Component.from_labeled_edges(list(triples))


class TestPolarityAccuracy:
    def test_template_output_scores_one(self):
        component = _component(
            ("ACEs of parents", Polarity.POSITIVE, "Parental risk factors"),
            ("Parental risk factors", Polarity.NEGATIVE, "family stability"),
        )
        text = (
            "ACEs of parents increases Parental risk factors. "
            "Parental risk factors decreases family stability."
        )
        assert polarity_accuracy(component, text) == 1.0

    def test_wrong_direction_cue_scores_zero(self):
        component = _component(("stress", Polarity.NEGATIVE, "sleep"))
        assert polarity_accuracy(component, "stress increases sleep.") == 0.0

    def test_missing_target_concept_scores_zero(self):
        component = _component(("stress", Polarity.POSITIVE, "fatigue"))
        assert polarity_accuracy(component, "stress increases a lot.") == 0.0

    def test_paraphrased_cue_matches_by_stem(self):
        component = _component(("exercise", Polarity.NEGATIVE, "obesity"))
        assert polarity_accuracy(component, "exercise is reducing obesity.") == 1.0

    def test_partial_credit_across_edges(self):
        component = _component(
            ("a factor", Polarity.POSITIVE, "b factor"),
            ("b factor", Polarity.POSITIVE, "c factor"),
        )
        text = "a factor increases b factor."
        assert polarity_accuracy(component, text) == pytest.approx(0.5)

    def test_lexicon_must_not_overlap(self):
        with pytest.raises(MetricError):
            PolarityLexicon.from_words(["raise"], ["raise"])

    def test_lexicon_must_not_be_empty(self):
        with pytest.raises(MetricError):
            PolarityLexicon.from_words([], ["cut"])

    def test_lexicon_file_round_trip(self, tmp_path):
        path = tmp_path / "lexicon.json"
        path.write_text(json.dumps({"increase": ["escalate"], "decrease": ["curb"]}))
        lexicon = PolarityLexicon.from_file(path)
        component = _component(("noise", Polarity.POSITIVE, "stress"))
        assert polarity_accuracy(component, "noise escalates stress", lexicon) == 1.0


class TestAggregate:
    def test_single_report_is_identity(self):
        report = MetricReport(rouge_l=0.5, meteor_lite=0.25, polarity_accuracy=1.0)
        assert aggregate([report]) == report

    def test_mean_of_two(self):
        a = MetricReport(rouge_l=0.4, meteor_lite=0.4)
        b = MetricReport(rouge_l=0.6, meteor_lite=0.6)
        merged = aggregate([a, b])
        assert merged.rouge_l == pytest.approx(0.5)
        assert merged.meteor_lite == pytest.approx(0.5)
        assert merged.polarity_accuracy is None

    def test_external_metrics_average_over_carriers_only(self):
        a = MetricReport(rouge_l=1.0, meteor_lite=1.0, external={"bert": 0.8})
        b = MetricReport(rouge_l=1.0, meteor_lite=1.0)
        merged = aggregate([a, b])
        assert merged.external == {"bert": 0.8}

    def test_empty_rejected(self):
        with pytest.raises(MetricError):
            aggregate([])


ECHO_ADAPTER = (
    f"{sys.executable} -c \""
    "import sys, json\n"
    "for line in sys.stdin:\n"
    "    if line.strip():\n"
    "        print(json.dumps({'name': 'echo', 'score': 0.9}))\n"
    "\""
)


class TestExternalScore:
    PAIRS = [ScoredPair("a b", "a b"), ScoredPair("c d", "c d")]

    def test_constant_adapter_scores_every_pair(self):
        scores = external_score(self.PAIRS, ECHO_ADAPTER)
        assert scores == {"echo": [0.9, 0.9]}

    def test_unreachable_adapter_degrades_to_empty(self):
        assert external_score(self.PAIRS, "/no/such/binary-xyz") == {}

    def test_strict_mode_raises(self):
        with pytest.raises(AdapterError):
            external_score(self.PAIRS, "/no/such/binary-xyz", strict=True)

    def test_count_mismatch_enforced(self):
        one_line = (
            f"{sys.executable} -c \"print('{{\\\"name\\\": \\\"x\\\", \\\"score\\\": 1.0}}')\""
        )
        with pytest.raises(AdapterError):
            external_score(self.PAIRS, one_line, strict=True)
        assert external_score(self.PAIRS, one_line) == {}


class TestScorePair:
    def test_scores_in_unit_interval_and_polarity_only_with_component(self):
        without = score_pair(ScoredPair("a rises", "a rises"))
        assert without.polarity_accuracy is None
        component = _component(("a", Polarity.POSITIVE, "b"))
        with_component = score_pair(
            ScoredPair("a increases b.", "a increases b.", component=component)
        )
        assert with_component.polarity_accuracy == 1.0
        assert with_component.rouge_l == 1.0
