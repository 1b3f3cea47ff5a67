import init, { penalty_curve, dag_for_ordering, simulate_fit } from "./pkg/sparsedag_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(target, err) {
  target.innerHTML = "";
  const p = document.createElement("p");
  p.className = "error";
  p.textContent = String(err);
  target.appendChild(p);
}

function edgeTable(edges, extra) {
  const rows = edges
    .map((e) => `<tr><td>${e.from}</td><td>${e.to}</td><td>${e.weight.toFixed(4)}</td>${extra ? extra(e) : ""}</tr>`)
    .join("");
  return `<table><tr><th>from</th><th>to</th><th>weight</th>${extra ? "<th></th>" : ""}</tr>${rows}</table>`;
}

function drawCurve() {
  const svg = $("c-plot");
  const W = 560, H = 260, pad = 30;
  const lambda = num("c-lambda");
  const gamma = num("c-gamma");
  const xMax = Math.max(4 * lambda * Math.max(gamma, 1), 1e-6);
  let curve;
  try {
    curve = JSON.parse(penalty_curve($("c-family").value, lambda, gamma, xMax, 200));
  } catch (e) {
    svg.innerHTML = "";
    fail($("c-info"), e);
    return;
  }
  const yMax = Math.max(...curve.y, 1e-12) * 1.1;
  const sx = (x) => pad + (x / xMax) * (W - 2 * pad);
  const sy = (y) => H - pad - (y / yMax) * (H - 2 * pad);
  const pts = curve.x.map((x, i) => `${sx(x).toFixed(1)},${sy(curve.y[i]).toFixed(1)}`).join(" ");
  svg.innerHTML =
    `<line x1="${pad}" y1="${H - pad}" x2="${W - pad}" y2="${H - pad}" stroke="#999"/>` +
    `<line x1="${pad}" y1="${pad}" x2="${pad}" y2="${H - pad}" stroke="#999"/>` +
    `<text x="${W - pad}" y="${H - 8}" text-anchor="end" font-size="11">|x| up to ${xMax.toPrecision(3)}</text>` +
    `<text x="${pad + 4}" y="${pad - 8}" font-size="11">ρ up to ${yMax.toPrecision(3)}</text>` +
    `<polyline fill="none" stroke="#1565c0" stroke-width="2" points="${pts}"/>`;
  const fmt = (v) => (v === null ? "free" : v.toPrecision(4));
  $("c-info").textContent =
    `lower bound ρ(x) ≥ min(μ₁λx, μ₂λ²) with μ₁ = ${fmt(curve.mu1)}, μ₂ = ${fmt(curve.mu2)}` +
    (curve.mu3 === null ? "; unbounded above" : `; bounded above by μ₃λ² with μ₃ = ${fmt(curve.mu3)}`);
}

function runOrdering() {
  const out = $("o-out");
  try {
    const r = JSON.parse(dag_for_ordering($("o-sigma").value, $("o-perm").value));
    let html = edgeTable(r.edges);
    html += `<p>noise variances: ${r.variances.map((v) => v.toPrecision(5)).join(", ")}; total ${r.trace.toPrecision(6)}</p>`;
    if (r.min_trace) {
      html += `<p>smallest total over all orderings: ${r.min_trace.trace.toPrecision(6)} at ordering
        [${r.min_trace.permutation.join(", ")}]${r.min_trace.unique ? " (unique DAG)" : " (tied)"}</p>`;
    }
    out.innerHTML = html;
  } catch (e) {
    fail(out, e);
  }
}

function runSimulation() {
  const out = $("s-out");
  out.textContent = "fitting...";
  // let the message paint before the synchronous fit
  setTimeout(() => {
    try {
      const r = JSON.parse(
        simulate_fit(num("s-p"), num("s-n"), num("s-d"), num("s-seed"), "mcp", num("s-lambda"), num("s-gamma")),
      );
      const truth = new Map(r.truth.map((e) => [`${e.from}>${e.to}`, e.weight]));
      const mark = (e) => `<td>${truth.has(`${e.from}>${e.to}`) ? "true edge" : "spurious"}</td>`;
      const missed = r.truth.filter((t) => !r.estimate.some((e) => e.from === t.from && e.to === t.to));
      out.innerHTML =
        `<p>support ${r.support_recovered ? "recovered exactly" : "not recovered"}; objective ${r.objective.toPrecision(6)}</p>` +
        `<h3>true DAG</h3>${edgeTable(r.truth)}<h3>estimate</h3>${edgeTable(r.estimate, mark)}` +
        (missed.length ? `<p>missed: ${missed.map((e) => `${e.from}→${e.to}`).join(", ")}</p>` : "");
    } catch (e) {
      fail(out, e);
    }
  }, 10);
}

await init();
for (const id of ["c-family", "c-lambda", "c-gamma"]) $(id).addEventListener("input", drawCurve);
$("o-run").addEventListener("click", runOrdering);
$("s-run").addEventListener("click", runSimulation);
drawCurve();
runOrdering();
