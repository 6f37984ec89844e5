"""OR-Library price files, return series and chronological train/test splits.

An OR-Library index-tracking file is a flat stream of whitespace separated
numbers: a header ``N T`` followed by ``(N + 1) * T`` prices for the index
and its ``N`` constituents. How those prices are ordered is not fixed here;
callers pick one of the four layouts in :data:`LAYOUTS`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadSplit, InvalidPanel, MalformedNumber, NonPositivePrice, TokenCountMismatch

log = logging.getLogger(__name__)

LAYOUTS = (
    "period-index-first",
    "period-index-last",
    "series-index-first",
    "series-index-last",
)
DEFAULT_LAYOUT = "period-index-first"


@dataclass(frozen=True, eq=False)
class PricePanel:
    """Index levels and constituent prices on a common grid of periods.

    ``stock_prices`` has shape ``(n_periods, n_stocks)``; column ``i`` is the
    price history of stock ``i``.
    """

    index_prices: np.ndarray
    stock_prices: np.ndarray
    source_name: str = ""

    def __post_init__(self):
        idx = np.asarray(self.index_prices, dtype=float)
        stk = np.asarray(self.stock_prices, dtype=float)
        if idx.ndim != 1 or stk.ndim != 2 or stk.shape[0] != idx.shape[0]:
            raise InvalidPanel(
                f"index series of length {idx.shape} and stock matrix {stk.shape} do not align"
            )
        if idx.shape[0] < 3:
            raise InvalidPanel(f"need at least 3 periods, got {idx.shape[0]}")
        if stk.shape[1] < 2:
            raise InvalidPanel(f"need at least 2 stocks, got {stk.shape[1]}")
        for name, arr in (("index", idx), ("stock", stk)):
            if not np.all(np.isfinite(arr)):
                raise NonPositivePrice(f"{name} prices contain non-finite values")
            if np.any(arr <= 0):
                raise NonPositivePrice(f"{name} prices must be strictly positive")
        idx.setflags(write=False)
        stk.setflags(write=False)
        object.__setattr__(self, "index_prices", idx)
        object.__setattr__(self, "stock_prices", stk)

    @property
    def n_stocks(self) -> int:
        return self.stock_prices.shape[1]

    @property
    def n_periods(self) -> int:
        return self.stock_prices.shape[0]


@dataclass(frozen=True, eq=False)
class ReturnsData:
    """Stock return matrix ``R`` (T x N) and index returns, split by rows.

    The first ``train_rows`` rows form the training block, the remaining
    ``test_rows`` the test block.
    """

    stock_returns: np.ndarray
    index_returns: np.ndarray
    train_rows: int
    test_rows: int = 0
    source_name: str = ""

    def __post_init__(self):
        R = np.asarray(self.stock_returns, dtype=float)
        r = np.asarray(self.index_returns, dtype=float)
        if R.ndim != 2 or r.ndim != 1 or R.shape[0] != r.shape[0]:
            raise InvalidPanel(f"return matrix {R.shape} and index returns {r.shape} do not align")
        if self.train_rows < 0 or self.test_rows < 0 or self.train_rows + self.test_rows != R.shape[0]:
            raise BadSplit(
                f"train_rows={self.train_rows} + test_rows={self.test_rows} != T={R.shape[0]}"
            )
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(r))):
            raise InvalidPanel("returns contain non-finite values")
        R.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "stock_returns", R)
        object.__setattr__(self, "index_returns", r)

    @property
    def n_periods(self) -> int:
        return self.stock_returns.shape[0]

    @property
    def n_stocks(self) -> int:
        return self.stock_returns.shape[1]

    @property
    def train(self) -> tuple[np.ndarray, np.ndarray]:
        """``(R, index_returns)`` restricted to the training rows."""
        n = self.train_rows
        return self.stock_returns[:n], self.index_returns[:n]

    @property
    def test(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.train_rows
        return self.stock_returns[n:], self.index_returns[n:]


def _to_float(tok: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MalformedNumber(f"cannot parse {tok!r} as a number") from None


def _to_count(tok: str, what: str) -> int:
    try:
        value = float(tok)
    except ValueError:
        raise MalformedNumber(f"header {what} {tok!r} is not a number") from None
    if not value.is_integer() or value < 1:
        raise MalformedNumber(f"header {what} must be a positive integer, got {tok!r}")
    return int(value)


def parse_orlib(text: str, layout: str = DEFAULT_LAYOUT, source_name: str = "") -> PricePanel:
    """Parse the text of an OR-Library index-tracking file.

    Layouts:

    * ``period-index-first``: one block per period, ``I_t, P_1t, ..., P_Nt``
    * ``period-index-last``: one block per period, ``P_1t, ..., P_Nt, I_t``
    * ``series-index-first``: the full index series, then each stock series
    * ``series-index-last``: each stock series, then the index series
    """
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}; expected one of {', '.join(LAYOUTS)}")
    tokens = text.split()
    if len(tokens) < 2:
        raise TokenCountMismatch(f"expected a header 'N T', found {len(tokens)} tokens")
    n = _to_count(tokens[0], "N")
    t = _to_count(tokens[1], "T")
    expected = (n + 1) * t
    if len(tokens) - 2 != expected:
        raise TokenCountMismatch(
            f"header N={n}, T={t} requires {expected + 2} tokens, found {len(tokens)}"
        )
    values = np.array([_to_float(tok) for tok in tokens[2:]], dtype=float)

    if layout.startswith("period"):
        block = values.reshape(t, n + 1)
    else:
        block = values.reshape(n + 1, t).T
    if layout.endswith("first"):
        index, stocks = block[:, 0], block[:, 1:]
    else:
        index, stocks = block[:, -1], block[:, :-1]

    if np.any(values <= 0):
        bad = int(np.count_nonzero(values <= 0))
        raise NonPositivePrice(f"{bad} non-positive price(s) in {source_name or 'input'}")

    panel = PricePanel(np.ascontiguousarray(index), np.ascontiguousarray(stocks), source_name)
    dup = [i for i in range(n) if np.array_equal(stocks[:, i], index)]
    if dup:
        log.warning(
            "%s: stock column(s) %s duplicate the index series exactly; check the layout (%s)",
            source_name or "input", dup, layout,
        )
    return panel


def load_orlib(path: str | Path, layout: str = DEFAULT_LAYOUT) -> PricePanel:
    path = Path(path)
    return parse_orlib(path.read_text(), layout=layout, source_name=path.stem)


def format_orlib(panel: PricePanel, layout: str = DEFAULT_LAYOUT) -> str:
    """Serialize ``panel`` back into the OR-Library token stream."""
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    if layout.endswith("first"):
        block = np.column_stack([panel.index_prices, panel.stock_prices])
    else:
        block = np.column_stack([panel.stock_prices, panel.index_prices])
    flat = block.ravel() if layout.startswith("period") else block.T.ravel()
    lines = [f"{panel.n_stocks} {panel.n_periods}"]
    lines.extend(repr(float(v)) for v in flat)
    return "\n".join(lines) + "\n"


def to_returns(panel: PricePanel) -> ReturnsData:
    """Simple returns ``(P[t+1] - P[t]) / P[t]`` for the index and every stock."""
    P = panel.stock_prices
    idx = panel.index_prices
    R = (P[1:] - P[:-1]) / P[:-1]
    r = (idx[1:] - idx[:-1]) / idx[:-1]
    return ReturnsData(R, r, train_rows=R.shape[0], test_rows=0, source_name=panel.source_name)


def split(data: ReturnsData, train_count: int | None = None) -> ReturnsData:
    """Chronological split: the first ``train_count`` rows train, the rest test.

    ``train_count`` defaults to ``floor(T / 2)``.
    """
    T = data.n_periods
    if train_count is None:
        train_count = T // 2
    if not 1 <= train_count <= T - 1:
        raise BadSplit(f"train_count must lie in [1, {T - 1}], got {train_count}")
    return ReturnsData(
        data.stock_returns,
        data.index_returns,
        train_rows=int(train_count),
        test_rows=T - int(train_count),
        source_name=data.source_name,
    )
