"""Synthetic corpus, label assignment, scanpath simulation and dataset
export."""

import math

import numpy as np
import pytest

from gazeword import synth
from gazeword.synth import (NoiseModel, UserProfile, assign_labels,
                            build_scanpath, emit_stream, export_dataset,
                            gen_corpus, load_export, make_users,
                            reference_stream, simulate_gaze)
from gazeword.gaze import gaze_mae
from gazeword.training import jaccard


@pytest.fixture(scope="module")
def corpus():
    return gen_corpus(seed=7, n_docs=4, words_per_doc=120)


@pytest.fixture(scope="module")
def user():
    return UserProfile(user_id="u0", proficiency=1800)


class TestGenCorpus:
    def test_deterministic(self, corpus):
        layouts, _, ranks = corpus
        again, _, ranks2 = gen_corpus(seed=7, n_docs=4, words_per_doc=120)
        assert ranks == ranks2
        for a, b in zip(layouts, again):
            assert [w.text for w in a.words] == [w.text for w in b.words]
            assert a.words[5].box.as_list() == b.words[5].box.as_list()

    def test_seed_changes_corpus(self, corpus):
        layouts, _, _ = corpus
        other, _, _ = gen_corpus(seed=8, n_docs=4, words_per_doc=120)
        assert [w.text for w in layouts[0].words] != \
            [w.text for w in other[0].words]

    def test_word_count_and_layout_bounds(self, corpus):
        layouts, _, _ = corpus
        for layout in layouts:
            assert len(layout.words) == 120
            for w in layout.words:
                assert 0 <= w.box.x_min and w.box.x_max <= synth.SCREEN_W
                assert 0 <= w.box.y_min and w.box.y_max <= synth.SCREEN_H

    def test_min_doc_length_enforced(self):
        with pytest.raises(ValueError, match=">= 50"):
            gen_corpus(seed=0, n_docs=1, words_per_doc=10)

    def test_ranks_cover_lexicon(self, corpus):
        _, _, ranks = corpus
        assert len(ranks) == synth.LEXICON_SIZE
        assert sorted(ranks.values()) == list(range(1, synth.LEXICON_SIZE + 1))

    def test_frequency_follows_rank(self, corpus):
        layouts, freq, ranks = corpus
        by_rank = sorted(ranks.items(), key=lambda kv: kv[1])
        head = [freq.count(w) for w, _ in by_rank[:20]]
        tail = [freq.count(w) for w, _ in by_rank[-500:]]
        assert np.mean(head) > 10 * max(np.mean(tail), 0.1)


class TestUsers:
    def test_make_users_geometric_spread(self):
        users = make_users(0, 8)
        profs = [u.proficiency for u in users]
        assert len(users) == 8
        assert profs == sorted(profs)
        assert profs[0] == 1650 and profs[-1] == 2950

    def test_profile_validation(self):
        with pytest.raises(ValueError, match="proficiency"):
            UserProfile(user_id="x", proficiency=0)
        with pytest.raises(ValueError, match="label_noise"):
            UserProfile(user_id="x", proficiency=100, label_noise=0.5)


class TestAssignLabels:
    def test_deterministic(self, corpus, user):
        layouts, _, ranks = corpus
        a = assign_labels(user, layouts[0], ranks, seed=7)
        assert a == assign_labels(user, layouts[0], ranks, seed=7)

    def test_function_words_always_known(self, corpus, user):
        layouts, _, ranks = corpus
        labels = assign_labels(user, layouts[0], ranks, seed=7)
        for w in layouts[0].words:
            if w.is_function_word:
                assert labels[w.word_index] is False

    def test_threshold_separates_rank_bands(self, corpus):
        layouts, _, ranks = corpus
        lo_user = UserProfile(user_id="novice", proficiency=200,
                              label_noise=0.0)
        hi_user = UserProfile(user_id="expert", proficiency=2900,
                              label_noise=0.0)
        spread = math.exp(synth.USER_THRESHOLD_SPREAD)
        for layout in layouts:
            lo = assign_labels(lo_user, layout, ranks, seed=7)
            hi = assign_labels(hi_user, layout, ranks, seed=7)
            for w in layout.words:
                if w.is_function_word:
                    continue
                rank = ranks.get(w.text.lower(), synth.LEXICON_SIZE + 1)
                if rank > 200 * spread:
                    assert lo[w.word_index] is True
                if rank <= 2900 / spread:
                    assert hi[w.word_index] is False

    def test_disjoint_proficiency_bands_low_jaccard(self, corpus):
        """Users at opposite ends of the proficiency scale should share
        few unknown words relative to their union."""
        layouts, _, ranks = corpus
        novice = UserProfile(user_id="novice", proficiency=300)
        expert = UserProfile(user_id="expert", proficiency=2800)
        a, b = set(), set()
        for layout in layouts:
            for idx, unk in assign_labels(novice, layout, ranks, 7).items():
                if unk:
                    a.add((layout.doc_id, idx))
            for idx, unk in assign_labels(expert, layout, ranks, 7).items():
                if unk:
                    b.add((layout.doc_id, idx))
        assert a and b
        assert jaccard(a, b) < 0.3


class TestScanpath:
    def test_reading_order_mostly_monotone(self, corpus, user):
        layouts, _, ranks = corpus
        labels = assign_labels(user, layouts[0], ranks, seed=7)
        path = build_scanpath(layouts[0], labels, user, seed=7)
        idx = [f.word_index for f in path]
        backward = sum(b < a for a, b in zip(idx, idx[1:]))
        assert backward <= len(idx) * 0.2   # only regressions go backward

    def test_dwell_gain_on_unknown_words(self, corpus, user):
        layouts, _, ranks = corpus
        known, unknown = [], []
        for layout in layouts:
            labels = assign_labels(user, layout, ranks, seed=7)
            first = {}
            for f in build_scanpath(layout, labels, user, seed=7):
                first.setdefault(f.word_index, f.duration_ms)
            for idx, dur in first.items():
                (unknown if labels[idx] else known).append(dur)
        assert len(unknown) >= 15
        assert np.mean(unknown) > 2 * np.mean(known)

    def test_empty_layout_rejected(self, user):
        from gazeword.textdoc import DocumentLayout
        with pytest.raises(ValueError, match="empty"):
            build_scanpath(DocumentLayout("d", [], 20.0), {}, user, 0)


class TestEmitStream:
    def _path(self, corpus, user):
        layouts, _, ranks = corpus
        labels = assign_labels(user, layouts[0], ranks, seed=7)
        return build_scanpath(layouts[0], labels, user, seed=7)

    def test_timestamps_strictly_increasing(self, corpus, user):
        stream = emit_stream(self._path(corpus, user),
                             NoiseModel.tracker(), seed=3)
        t = np.array([s.t_ms for s in stream])
        assert np.all(np.diff(t) > 0)

    def test_rate_within_configured_band(self, corpus, user):
        path = self._path(corpus, user)
        for noise in (NoiseModel.tracker(), NoiseModel.webcam()):
            stream = emit_stream(path, noise, seed=3)
            t = np.array([s.t_ms for s in stream])
            # dropout removes samples, so the modal gap reflects the rate
            gap = np.median(np.diff(t))
            hz = 1000.0 / gap
            assert noise.rate_lo - 1 <= hz <= noise.rate_hi + 1

    def test_source_tag_follows_noise_kind(self, corpus, user):
        path = self._path(corpus, user)
        web = emit_stream(path, NoiseModel.webcam(), seed=3)
        assert all(s.source.value == "webcam" for s in web)

    def test_reference_stream_is_noiseless(self, corpus, user):
        path = self._path(corpus, user)
        ref = reference_stream(path)
        fix_points = {(f.x, f.y) for f in path}
        assert all((s.x, s.y) in fix_points for s in ref)

    def test_webcam_noisier_than_tracker_paired(self, corpus):
        """Per-scanpath MAE of the webcam stream strictly exceeds the
        tracker stream on both axes."""
        layouts, _, ranks = corpus
        for i, u in enumerate(make_users(7, 3)):
            labels = assign_labels(u, layouts[i], ranks, seed=7)
            path = build_scanpath(layouts[i], labels, u, seed=7)
            ref = reference_stream(path)
            tr = emit_stream(path, NoiseModel.tracker(), seed=100 + i)
            wb = emit_stream(path, NoiseModel.webcam(), seed=100 + i)
            tx, ty = gaze_mae(ref, tr)
            wx, wy = gaze_mae(ref, wb)
            assert wx > tx and wy > ty

    def test_unknown_noise_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown noise"):
            NoiseModel.named("laser")

    def test_simulate_gaze_deterministic(self, corpus, user):
        layouts, _, ranks = corpus
        labels = assign_labels(user, layouts[0], ranks, seed=7)
        a = simulate_gaze(layouts[0], labels, user, NoiseModel.tracker(), 7)
        b = simulate_gaze(layouts[0], labels, user, NoiseModel.tracker(), 7)
        assert [(s.t_ms, s.x, s.y) for s in a] == \
            [(s.t_ms, s.x, s.y) for s in b]


class TestExport:
    def test_round_trip_and_reproducible(self, tmp_path):
        kw = dict(seed=3, n_users=2, n_docs=2, words_per_doc=60,
                  noise_kinds=("tracker",))
        m1 = export_dataset(tmp_path / "a", **kw)
        m2 = export_dataset(tmp_path / "b", **kw)
        assert m1["files"] == m2["files"]
        assert m1["counts"] == {"docs": 2, "users": 2, "streams": 4,
                                "labels": 240}
        export = load_export(tmp_path / "a")
        assert set(export["layouts"]) == {"doc000", "doc001"}
        assert len(export["streams"]) == 4
        assert all(k[2] == "tracker" for k in export["streams"])
        assert len(export["labels"]) == 240
        assert export["freq_table"].max_count > 0
