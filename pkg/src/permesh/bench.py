"""HTTP mediation benchmark: n POSTs through the full proxy pipeline vs
the direct native path, on an in-process stub server.

Wall-clock time measures only real pipeline cost; the configured simulated
latency is bookkept separately so the reported overhead excludes it.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

from .netsim import DnsTable, HttpStatus
from .permissions import AppManifest, PermissionRequest
from .simulator import Simulator
from . import env

BENCH_HOST = "stub.example.com"
BENCH_ADDR = "203.0.113.10"


@dataclass
class BenchResult:
    n: int
    latency_ms: float
    direct_ms: list[float] = field(default_factory=list)  # real pipeline cost
    proxy_ms: list[float] = field(default_factory=list)

    @property
    def direct_median(self) -> float:
        return statistics.median(self.direct_ms) if self.direct_ms else 0.0

    @property
    def proxy_median(self) -> float:
        return statistics.median(self.proxy_ms) if self.proxy_ms else 0.0

    @property
    def overhead_median_ms(self) -> float:
        """Median per-request pipeline overhead, simulated latency excluded."""
        return self.proxy_median - self.direct_median

    def simulated_total_ms(self, mode: str) -> float:
        timings = self.direct_ms if mode == "direct" else self.proxy_ms
        return sum(t + self.latency_ms for t in timings)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "latencyMs": self.latency_ms,
            "directMedianMs": self.direct_median,
            "proxyMedianMs": self.proxy_median,
            "overheadMedianMs": self.overhead_median_ms,
            "directSimTotalMs": self.simulated_total_ms("direct"),
            "proxySimTotalMs": self.simulated_total_ms("proxy"),
        }


def _fresh_sim(latency_ms: float) -> Simulator:
    sim = Simulator(
        dns=DnsTable.from_seed({BENCH_HOST: BENCH_ADDR}), latency_ms=latency_ms
    )
    sim.seed_standard()
    return sim


def bench_http(n: int = 32, latency_ms: float = 1.0) -> BenchResult:
    result = BenchResult(n=n, latency_ms=latency_ms)
    if n <= 0:
        return result

    sim = _fresh_sim(latency_ms)
    direct = AppManifest(
        package="bench.direct",
        permissions=[PermissionRequest(env.INTERNET)],
        legacy=True,
    )
    proxied = AppManifest(
        package="bench.proxied",
        permissions=[
            PermissionRequest(env.DOMAIN_SELECTIVE, ("*.example.com",))
        ],
    )
    sim.install_app(direct)
    sim.install_app(proxied)

    url = f"http://{BENCH_HOST}/post"
    body = b"x" * 64
    for pkg, bucket in (("bench.direct", result.direct_ms),
                        ("bench.proxied", result.proxy_ms)):
        for _ in range(n):
            t0 = time.perf_counter()
            outcome = sim.http_request(pkg, "POST", url, body)
            elapsed_ms = (time.perf_counter() - t0) * 1000.0
            if outcome.status is not HttpStatus.DELIVERED:
                raise RuntimeError(f"bench request failed: {outcome.status}")
            bucket.append(elapsed_ms)
    return result


def format_table(result: BenchResult) -> str:
    lines = [
        f"{'mode':<8} {'n':>4} {'median real ms':>15} {'sim total ms':>13}",
    ]
    for mode, median in (("direct", result.direct_median),
                         ("proxy", result.proxy_median)):
        lines.append(
            f"{mode:<8} {result.n:>4} {median:>15.4f} "
            f"{result.simulated_total_ms(mode):>13.1f}"
        )
    lines.append(f"median overhead (proxy - direct): {result.overhead_median_ms:.4f} ms")
    return "\n".join(lines)


def write_report(result: BenchResult, out_dir: str) -> list[str]:
    """Write the delimited timing data and a rendered figure next to it."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "bench.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["request", "direct_ms", "proxy_ms"])
        for i in range(result.n):
            writer.writerow([i, f"{result.direct_ms[i]:.6f}", f"{result.proxy_ms[i]:.6f}"])

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    xs = range(result.n)
    ax.plot(xs, result.direct_ms, marker="o", markersize=3, label="direct")
    ax.plot(xs, result.proxy_ms, marker="s", markersize=3, label="via proxy")
    ax.set_xlabel("request #")
    ax.set_ylabel("real pipeline time (ms)")
    ax.set_title(f"POST mediation cost, n={result.n} "
                 f"(median overhead {result.overhead_median_ms:.3f} ms)")
    ax.legend()
    fig.tight_layout()
    png_path = out / "bench.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [str(csv_path), str(png_path)]
