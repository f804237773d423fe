"""Shared test fixtures: broken schemes and a detectable attack."""

from qspirlab.density import DensityMatrix
from qspirlab.registers import RegisterLayout
from qspirlab.schemes import LinearPirScheme, QueryPlan, SchemeShape, SubsetScheme


class CorruptedSubsetScheme(SubsetScheme):
    """Subset scheme with server 2's selection vector zeroed.

    Reconstruction degrades to server 1's bare parity, so recovery succeeds
    only when that parity happens to match the requested bit.
    """

    name = "subset2-corrupted"

    def gen_plan(self, i, r):
        plan = super().gen_plan(i, r)
        return QueryPlan(i=plan.i, r=plan.r, queries=plan.queries,
                         selects=(plan.selects[0], 0), t=plan.t, a=plan.a)


class LeakyScheme(LinearPirScheme):
    """Single server receiving the requested index in the clear."""

    name = "leaky1"

    @property
    def shape(self):
        t = max(1, (self.n - 1).bit_length())
        return SchemeShape(k=1, t=t, a=self.n, randomness_size=1)

    def gen_plan(self, i, r):
        self._check_plan_args(i, r)
        return QueryPlan(i=i, r=r, queries=(i - 1,),
                         selects=(1 << (self.n - i),), t=self.shape.t, a=self.n)

    def answer(self, q, x):
        if x.n != self.n:
            raise ValueError("database size mismatch")
        return x.value


def leaky_attack_views(protocol, x, r, masks):
    """An attack whose server-1 message pins the mask register to 1.

    Stands in for any cheating strategy whose messages deviate from the
    honest distribution; the undetectability audit must flag it.
    """
    scheme = protocol.scheme
    s = scheme.shape
    plan = scheme.gen_plan(1, r)
    layout = RegisterLayout.of((f"srv1", s.t + s.a))
    content = (plan.queries[0] << s.a) | 1
    dm = DensityMatrix(layout, {(content, content): 1.0})
    return {("server1", "send:server1"): dm}
