"""Width and depth bounds of built networks."""

import logging

from ..enums import ArchitectureMode, NetKind
from ..equi_linear import parameter_bound
from ..exceptions import BoundViolationError
from ..models import BoundsReport, ParameterBound
from .network import Network

logger = logging.getLogger(__name__)

WIDE_DEPTH_BOUND = 3


def report_bounds(net: Network) -> BoundsReport:
    """Measured width/depth next to the bound that applies to ``net``.

    Deep mode bounds the width (``n(n+2)`` for invariant nets, ``n³`` for
    equivariant ones, lanes ``n+2``); wide mode bounds the depth by 3. Tensor
    nets have no bound and always pass.
    """
    n = net.degree
    width_bound = depth_bound = lane_bound = None
    if net.kind != NetKind.INVARIANT_TENSOR:
        if net.mode == ArchitectureMode.DEEP:
            width_bound = n**3 if net.kind == NetKind.EQUIVARIANT else n * (n + 2)
            lane_bound = n + 2
        else:
            depth_bound = WIDE_DEPTH_BOUND

    width, depth = net.width, net.depth
    passed = (width_bound is None or width <= width_bound) and (
        depth_bound is None or depth <= depth_bound
    )
    return BoundsReport(
        kind=net.kind,
        mode=net.mode,
        degree=n,
        width=width,
        depth=depth,
        width_bound=width_bound,
        depth_bound=depth_bound,
        lane_width_bound=lane_bound,
        passed=passed,
    )


def enforce_bounds(net: Network) -> BoundsReport:
    """:func:`report_bounds`, raising when the report fails.

    Raises:
        BoundViolationError: If the net exceeds its width or depth bound.
    """
    report = report_bounds(net)
    if not report.passed:
        raise BoundViolationError(
            f"{net!r} has width {report.width} and depth {report.depth}; "
            f"bounds are {report.width_bound} and {report.depth_bound}",
            code="bounds",
            details=report.model_dump(mode="json"),
        )
    logger.debug("Bounds ok for %r: width %d, depth %d", net, report.width, report.depth)
    return report


def net_parameter_bound(net: Network) -> ParameterBound:
    """:func:`~permnet.equi_linear.parameter_bound` for a built net.

    Widths are the input, hidden and output widths of ``net``; a layer counts
    as equivariant when its pattern ties at least two entries.
    """
    widths = [net.in_features] + net.hidden_widths() + [net.out_features]
    tied = sum(
        1
        for layer in net.affine_layers()
        if layer.pattern.weight_count < layer.pattern.in_size * layer.pattern.out_size
    )
    return parameter_bound(widths, net.degree, min(tied, len(widths) - 1), net.weight_count)
