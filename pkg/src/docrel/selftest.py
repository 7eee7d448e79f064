"""Built-in verification suites: gradient checks, oracle equivalence, invariants.

These run from the CLI (`docrel selftest`) and from the test suite. The
gradient checker compares every analytic gradient against central finite
differences (step 1e-5); a component passes when
``|analytic - numeric| <= 1e-4 * max(|analytic|, |numeric|)`` or the
absolute difference is below 1e-8 (floor for vanishing gradients).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .batching import Batch
from .core import Mention, PairExample, RelationVocabulary
from .evaluation import predict_labels
from .head import HeadParams, head_backward, head_forward
from .losses import (
    LossConfig,
    batch_loss,
    em_loss,
    em_loss_grad,
    l2_loss,
    l2_loss_grad,
    lt_loss,
    lt_loss_grad,
    pair_entropy,
    pair_entropy_grad,
    pairwise_probs,
    pmt_loss,
    pmt_loss_grad,
    scl_loss,
    scl_loss_grad,
)
from .rng import stream

__all__ = [
    "SuiteResult",
    "run_gradient_checks",
    "run_oracle_equivalence",
    "run_invariant_suite",
    "run_all",
]

FD_STEP = 1e-5
REL_TOL = 1e-4
ABS_FLOOR = 1e-8

P_SIZES = (0, 1, 5, 95)
LOGIT_SCALES = (0.1, 1.0, 10.0)
BATCH_SIZES = (2, 4, 16)


@dataclass(eq=False)
class SuiteResult:
    name: str
    checks: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, ok: bool, label: str) -> None:
        self.checks += 1
        if not ok:
            self.failures.append(label)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = "" if self.passed else f" ({len(self.failures)} failures)"
        return f"[{status}] {self.name}: {self.checks} checks{extra}"


def finite_difference(fn, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central finite differences of a scalar function over a flat array."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + step
        up = fn()
        flat[i] = keep - step
        down = fn()
        flat[i] = keep
        out[i] = (up - down) / (2.0 * step)
    return grad


def gradients_close(
    analytic: np.ndarray, numeric: np.ndarray, ref: float = 0.0
) -> bool:
    """Relative tolerance with an absolute floor for vanishing components.

    The floor grows with the checked function's magnitude: central
    differences cannot resolve gradients below ``|f| * eps / (2 step)``,
    the rounding noise of the two function evaluations.
    """
    floor = max(ABS_FLOOR, abs(ref) * 5e-11)
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    return bool(np.all((diff <= REL_TOL * scale) | (diff <= floor)))


def _random_logits(rng, n_logits: int, scale: float) -> np.ndarray:
    return rng.normal(scale=scale, size=n_logits)


def _unit_rows(rng, n: int, dim: int) -> np.ndarray:
    m = rng.normal(size=(n, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# gradient checks


def _check_threshold_terms(result: SuiteResult, seed: int) -> None:
    n_rel, na = 96, 96
    for p_size in P_SIZES:
        for scale in LOGIT_SCALES:
            for mode in ("unit", "set_size"):
                for rep in range(2):
                    rng = stream(seed, "grad-pmt", p_size, int(scale * 10), mode, rep)
                    f = _random_logits(rng, n_rel + 1, scale)
                    perm = rng.permutation(n_rel)
                    positives = sorted(int(r) for r in perm[:p_size])
                    negatives = sorted(int(r) for r in perm[p_size:])
                    cfg = LossConfig(entropy_norm=mode)

                    value, grad = pmt_loss_grad(f, positives, negatives, na)
                    num = finite_difference(
                        lambda: pmt_loss(f, positives, negatives, na), f
                    )
                    result.record(
                        gradients_close(grad, num, value), f"pmt P={p_size} scale={scale}"
                    )

                    value, grad = em_loss_grad(f, positives, negatives, na, cfg)
                    num = finite_difference(
                        lambda: em_loss(f, positives, negatives, na, cfg), f
                    )
                    result.record(
                        gradients_close(grad, num, value), f"em P={p_size} scale={scale} {mode}"
                    )


def _check_entropy(result: SuiteResult, seed: int) -> None:
    rng = stream(seed, "grad-entropy")
    for gap in (0.0, 0.5, -0.5, 2.0, -2.0, 5.0, -5.0, 8.0, -8.0):
        base = float(rng.normal())
        f = np.array([base + gap, base])
        _, dh = pair_entropy_grad(f[0], f[1])
        num = finite_difference(lambda: pair_entropy(f[0], f[1]), f)
        result.record(
            gradients_close(np.array([dh, -dh]), num), f"entropy gap={gap}"
        )


def _check_sampled(result: SuiteResult, seed: int) -> None:
    from .losses import _sampled_na_terms

    n_rel, na = 96, 96
    for ratio in (0.05, 0.5, 1.0):
        for mode in ("unit", "set_size"):
            for scale in LOGIT_SCALES:
                rng = stream(seed, "grad-sampled", int(ratio * 100), mode, int(scale * 10))
                f = _random_logits(rng, n_rel + 1, scale)
                size = max(1, round(ratio * n_rel))
                sampled = sorted(int(r) for r in rng.choice(n_rel, size=size, replace=False))
                cfg = LossConfig(entropy_norm=mode)

                def value() -> float:
                    neg, ent, _, _ = _sampled_na_terms(f, sampled, na, cfg)
                    return neg + ent

                neg, ent, g_neg, g_ent = _sampled_na_terms(f, sampled, na, cfg)
                num = finite_difference(value, f)
                result.record(
                    gradients_close(g_neg + g_ent, num, neg + ent),
                    f"sampled ratio={ratio} {mode} scale={scale}",
                )


def _check_contrastive(result: SuiteResult, seed: int) -> None:
    for n in BATCH_SIZES:
        for dim in (4, 8):
            for tau in (0.2, 1.0, 2.0):
                rng = stream(seed, "grad-scl", n, dim, int(tau * 10))
                emb = _unit_rows(rng, n, dim)
                anchor = int(rng.integers(n))
                others = [i for i in range(n) if i != anchor]
                k = int(rng.integers(1, len(others) + 1))
                positives = frozenset(int(i) for i in rng.choice(others, size=k, replace=False))

                value, grads = scl_loss_grad(anchor, emb, positives, tau)
                num = finite_difference(lambda: scl_loss(anchor, emb, positives, tau), emb)
                result.record(gradients_close(grads, num, value), f"scl n={n} d={dim} tau={tau}")

                value, grads = lt_loss_grad(anchor, emb, tau)
                num = finite_difference(lambda: lt_loss(anchor, emb, tau), emb)
                result.record(gradients_close(grads, num, value), f"lt n={n} d={dim} tau={tau}")

    for n in BATCH_SIZES:
        for tau in (0.5, 1.5):
            rng = stream(seed, "grad-l2", n, int(tau * 10))
            emb = _unit_rows(rng, n, 6)
            bp = tuple(i for i in range(n) if rng.random() < 0.7) or (0,)
            s_sets = {}
            for a in bp:
                others = [i for i in range(n) if i != a]
                k = int(rng.integers(0, len(others) + 1))
                s_sets[a] = frozenset(
                    int(i) for i in rng.choice(others, size=k, replace=False)
                )
            value, grads = l2_loss_grad(bp, s_sets, emb, tau)
            num = finite_difference(lambda: l2_loss(bp, s_sets, emb, tau), emb)
            result.record(gradients_close(grads, num, value), f"l2 n={n} tau={tau}")


def _tiny_instance(rng, n_rel: int, n: int, dim: int, sampling: bool):
    """Random labels, batch structure, logits, embeddings for a tiny batch."""
    labels = []
    for _ in range(n):
        if rng.random() < 0.4:
            labels.append(frozenset())
        else:
            k = int(rng.integers(1, min(2, n_rel) + 1))
            labels.append(frozenset(int(r) for r in rng.choice(n_rel, size=k, replace=False)))
    if n >= 2 and all(not l for l in labels):
        labels[0] = frozenset({0})  # keep at least one anchor
    bp = tuple(i for i, l in enumerate(labels) if l)
    bn = tuple(i for i, l in enumerate(labels) if not l)
    s_sets = {
        a: frozenset(p for p in range(n) if p != a and labels[p] & labels[a]) for a in bp
    }
    sampled = {}
    if sampling:
        for pos in bn:
            size = int(rng.integers(1, n_rel + 1))
            sampled[pos] = tuple(
                sorted(int(r) for r in rng.choice(n_rel, size=size, replace=False))
            )
    batch = Batch(
        example_indices=tuple(range(n)),
        bp_indices=bp,
        bn_indices=bn,
        s_sets=s_sets,
        sampled_negatives=sampled,
    )
    logits = rng.normal(scale=1.5, size=(n, n_rel + 1))
    emb = _unit_rows(rng, n, dim)
    return labels, batch, logits, emb


def _examples_for(labels, dim: int) -> list[PairExample]:
    dummy = np.zeros(2)
    return [
        PairExample(
            doc_id="d",
            head_id=0,
            tail_id=1,
            head_mentions=(Mention(0, dummy),),
            tail_mentions=(Mention(1, dummy),),
            context=dummy,
            positive_relations=l,
        )
        for l in labels
    ]


def _forwards_for(logits: np.ndarray, emb: np.ndarray):
    from .head import PairForward

    return [
        PairForward(x=emb[i], x_unit=emb[i], f=logits[i], cache=None)
        for i in range(logits.shape[0])
    ]


def _check_batch_loss(result: SuiteResult, seed: int) -> None:
    for n in (2, 4, 6):
        for scale_idx, lam in enumerate((0.0, 0.5, 2.0)):
            for sampling in (False, True):
                rng = stream(seed, "grad-batch", n, scale_idx, int(sampling))
                n_rel = int(rng.integers(3, 6))
                labels, batch, logits, emb = _tiny_instance(rng, n_rel, n, 5, sampling)
                vocab = RelationVocabulary.from_relations(
                    [f"r{k}" for k in range(n_rel)]
                )
                cfg = LossConfig(
                    temperature=0.8,
                    contrastive_weight=lam,
                    entropy_norm="set_size" if n % 2 else "unit",
                    use_neg_sampling=sampling,
                )
                examples = _examples_for(labels, 5)

                def total() -> float:
                    fwd = _forwards_for(logits, emb)
                    return batch_loss(examples, batch, fwd, vocab, cfg).total

                out = batch_loss(examples, batch, _forwards_for(logits, emb), vocab, cfg)
                num_logits = finite_difference(total, logits)
                num_emb = finite_difference(total, emb)
                ok = gradients_close(
                    np.stack(out.grad_logits), num_logits, out.total
                ) and gradients_close(np.stack(out.grad_embeddings), num_emb, out.total)
                result.record(ok, f"batch n={n} lam={lam} sampling={sampling}")


def _random_head(rng, d: int, d1: int, groups: int, n_logits: int) -> HeadParams:
    def u(shape, b):
        return rng.uniform(-b, b, size=shape)

    return HeadParams(
        W_h=u((d1, d), 0.8),
        W_t=u((d1, d), 0.8),
        W_c1=u((d1, d), 0.8),
        W_c2=u((d1, d), 0.8),
        W_o=u((n_logits, d1 * d1 // groups), 0.8),
        b_o=u((n_logits,), 0.5),
        group_count=groups,
    )


def _check_head(result: SuiteResult, seed: int) -> None:
    sizes = ((2, 2, 1), (3, 4, 2), (4, 4, 4), (3, 6, 3))
    for size_idx, (d, d1, groups) in enumerate(sizes):
        for rep in range(5):
            rng = stream(seed, "grad-head", size_idx, rep)
            n_logits = 4
            params = _random_head(rng, d, d1, groups, n_logits)
            n_head = int(rng.integers(1, 4))
            n_tail = int(rng.integers(1, 4))
            head_emb = rng.normal(size=(n_head, d))
            tail_emb = rng.normal(size=(n_tail, d))
            context = rng.normal(size=d)
            g_f = rng.normal(size=n_logits)
            g_x = rng.normal(size=params.pair_dim)

            def example() -> PairExample:
                return PairExample(
                    doc_id="d",
                    head_id=0,
                    tail_id=1,
                    head_mentions=tuple(Mention(0, e) for e in head_emb),
                    tail_mentions=tuple(Mention(1, e) for e in tail_emb),
                    context=context,
                    positive_relations=frozenset(),
                )

            def loss() -> float:
                fw = head_forward(example(), params, keep_cache=False)
                return float(g_f @ fw.f + g_x @ fw.x_unit)

            fw = head_forward(example(), params)
            grads, input_grads = head_backward(fw, g_x, g_f, params)

            ref = loss()
            ok = True
            for name, tensor in params.tensors().items():
                num = finite_difference(loss, tensor)
                ok = ok and gradients_close(grads[name], num, ref)
            ok = ok and gradients_close(
                input_grads["context"], finite_difference(loss, context), ref
            )
            ok = ok and gradients_close(
                input_grads["head_mentions"], finite_difference(loss, head_emb), ref
            )
            ok = ok and gradients_close(
                input_grads["tail_mentions"], finite_difference(loss, tail_emb), ref
            )
            result.record(ok, f"head d={d} d1={d1} P={groups} rep={rep}")


def run_gradient_checks(seed: int = 0) -> SuiteResult:
    result = SuiteResult("gradient checks")
    _check_threshold_terms(result, seed)
    _check_entropy(result, seed)
    _check_sampled(result, seed)
    _check_contrastive(result, seed)
    _check_batch_loss(result, seed)
    _check_head(result, seed)
    return result


# ---------------------------------------------------------------------------
# oracle equivalence


def run_oracle_equivalence(seed: int = 0, instances: int = 50) -> SuiteResult:
    """Compare batch_loss against the naive direct transcription."""
    result = SuiteResult("oracle equivalence")
    for case in range(instances):
        rng = stream(seed, "oracle", case)
        n_rel = int(rng.integers(2, 6))
        n = int(rng.integers(2, 7))
        dim = int(rng.integers(2, 9))
        sampling = bool(rng.random() < 0.5)
        labels, batch, logits, emb = _tiny_instance(rng, n_rel, n, dim, sampling)
        vocab = RelationVocabulary.from_relations([f"r{k}" for k in range(n_rel)])
        cfg = LossConfig(
            temperature=float(rng.uniform(0.2, 2.0)),
            contrastive_weight=float(rng.choice([0.0, 0.5, 2.0])),
            entropy_norm=str(rng.choice(["unit", "set_size"])),
            use_neg_sampling=sampling,
        )
        out = batch_loss(
            _examples_for(labels, dim), batch, _forwards_for(logits, emb), vocab, cfg
        )
        expected = oracle.batch_total(
            labels,
            n_rel,
            vocab.na_index,
            logits,
            emb,
            batch.bp_indices,
            batch.s_sets,
            batch.sampled_negatives,
            cfg.temperature,
            cfg.contrastive_weight,
            cfg.entropy_norm,
            use_neg_sampling=sampling,
        )
        rel = abs(out.total - expected) / max(1.0, abs(out.total), abs(expected))
        result.record(rel < 1e-10, f"case {case}: got {out.total}, oracle {expected}")

        recombined = (
            out.parts["pmt"]
            + out.parts["em"]
            + out.parts["sampled_neg"]
            + cfg.contrastive_weight * (out.parts["scl"] + out.parts["lt"])
        )
        rel_parts = abs(recombined - out.total) / max(1.0, abs(out.total))
        result.record(rel_parts < 1e-9, f"case {case}: parts do not recombine")
    return result


# ---------------------------------------------------------------------------
# invariants


def run_invariant_suite(seed: int = 0) -> SuiteResult:
    result = SuiteResult("invariants")
    rng = stream(seed, "invariants")

    # two-way probabilities sum to one
    for _ in range(200):
        f_r, f_eta = rng.normal(scale=5, size=2)
        p, q = pairwise_probs(float(f_r), float(f_eta))
        result.record(p + q == 1.0, f"p+q != 1 at ({f_r}, {f_eta})")

    # entropy bounds, symmetry, monotonicity
    ln2 = math.log(2.0)
    gaps = np.sort(np.abs(rng.normal(scale=4, size=50)))
    values = [pair_entropy(float(g), 0.0) for g in gaps]
    for g, h in zip(gaps, values):
        result.record(0.0 <= h <= ln2 + 1e-15, f"entropy out of bounds at gap {g}")
        sym = pair_entropy(0.0, float(g))
        result.record(abs(h - sym) < 1e-12, f"entropy asymmetric at gap {g}")
    result.record(
        all(values[i] >= values[i + 1] - 1e-12 for i in range(len(values) - 1)),
        "entropy not decreasing in |gap|",
    )
    result.record(abs(pair_entropy(3.0, 3.0) - ln2) < 1e-12, "entropy maximum")

    # logit-shift invariance of pairwise losses and predictions
    for _ in range(25):
        n_rel = int(rng.integers(2, 8))
        f = rng.normal(scale=2, size=n_rel + 1)
        shift = float(rng.normal(scale=20))
        perm = rng.permutation(n_rel)
        k = int(rng.integers(0, n_rel + 1))
        pos = sorted(int(r) for r in perm[:k])
        neg = sorted(int(r) for r in perm[k:])
        cfg = LossConfig()
        a = pmt_loss(f, pos, neg, n_rel)
        b = pmt_loss(f + shift, pos, neg, n_rel)
        result.record(abs(a - b) <= 1e-9 * max(1.0, abs(a)), "pmt not shift invariant")
        a = em_loss(f, pos, neg, n_rel, cfg)
        b = em_loss(f + shift, pos, neg, n_rel, cfg)
        result.record(abs(a - b) <= 1e-9 * max(1.0, abs(a)), "em not shift invariant")
        result.record(
            predict_labels(f, n_rel) == predict_labels(f + shift, n_rel),
            "prediction not shift invariant",
        )

    # contrastive batch-permutation invariance
    for _ in range(10):
        n = int(rng.integers(3, 7))
        labels, batch, _, emb = _tiny_instance(rng, 4, n, 5, False)
        value = l2_loss(batch.bp_indices, batch.s_sets, emb, 0.5)
        perm = rng.permutation(n)
        inv = np.argsort(perm)
        emb_p = emb[perm]
        bp_p = tuple(sorted(int(inv[a]) for a in batch.bp_indices))
        s_p = {
            int(inv[a]): frozenset(int(inv[m]) for m in members)
            for a, members in batch.s_sets.items()
        }
        value_p = l2_loss(bp_p, s_p, emb_p, 0.5)
        result.record(
            abs(value - value_p) <= 1e-12 * max(1.0, abs(value)),
            "l2 not permutation invariant",
        )

    # identical-embedding batches: scl is log(n-1) independent of temperature
    for n in (2, 3, 5, 9):
        base = _unit_rows(rng, 1, 6)[0]
        emb = np.tile(base, (n, 1))
        for tau in (0.1, 1.0, 3.0):
            v = scl_loss(0, emb, frozenset({1}), tau)
            result.record(
                abs(v - math.log(n - 1)) < 1e-9, f"identical batch scl n={n} tau={tau}"
            )

    # micro-F1 identity
    for _ in range(50):
        tp, fp, fn = (int(x) for x in rng.integers(0, 20, size=3))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        expected = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0
        result.record(abs(f1 - expected) < 1e-12, "micro F1 identity")

    return result


def run_all(seed: int = 0) -> list[SuiteResult]:
    return [
        run_gradient_checks(seed),
        run_oracle_equivalence(seed),
        run_invariant_suite(seed),
    ]
