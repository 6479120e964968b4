import init, { gmmOptimal, gaussianOptimal, gaussianSampled, criticalEpsilon } from "./pkg/starbody_web.js";

const NODES = 512;
const $ = (id) => document.getElementById(id);

function draw(canvas, outlines) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  let extent = 0;
  for (const { points } of outlines) {
    for (const v of points) extent = Math.max(extent, Math.abs(v));
  }
  const scale = (0.45 * Math.min(w, h)) / (extent || 1);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(0, h / 2); ctx.lineTo(w, h / 2);
  ctx.moveTo(w / 2, 0); ctx.lineTo(w / 2, h);
  ctx.stroke();
  for (const { points, color, dash } of outlines) {
    ctx.strokeStyle = color;
    ctx.setLineDash(dash || []);
    ctx.lineWidth = 2;
    ctx.beginPath();
    for (let i = 0; i < points.length; i += 2) {
      const x = w / 2 + scale * points[i];
      const y = h / 2 - scale * points[i + 1];
      if (i === 0) ctx.moveTo(x, y); else ctx.lineTo(x, y);
    }
    ctx.closePath();
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function showValues(ids) {
  for (const id of ids) $(`${id}-v`).textContent = $(id).value;
}

function updateGmm() {
  showValues(["eps"]);
  try {
    const o = gmmOptimal(Number($("eps").value), NODES);
    draw($("gmm"), [{ points: o.points, color: o.convex ? "#1565c0" : "#c62828" }]);
    $("gmm-out").textContent =
      `convex: ${o.convex}   margin: ${o.margin.toExponential(2)}\nrisk E‖x‖_K★: ${o.risk.toFixed(5)}`;
    o.free();
  } catch (e) {
    $("gmm-out").textContent = String(e);
  }
}

let seed = 1;

function updateGauss() {
  showValues(["s11", "s12", "s22"]);
  const m = Math.round(10 ** Number($("m").value));
  $("m-v").textContent = m;
  const [a, b, c] = ["s11", "s12", "s22"].map((id) => Number($(id).value));
  try {
    const exact = gaussianOptimal(a, b, c, NODES);
    const est = gaussianSampled(a, b, c, m, seed, 0.15, NODES);
    draw($("gauss"), [
      { points: exact.points, color: "#1565c0" },
      { points: est.points, color: "#ef6c00", dash: [5, 4] },
    ]);
    $("gauss-out").textContent =
      `analytic risk: ${exact.risk.toFixed(5)}\nfrom ${m} samples (dashed): ${est.risk.toFixed(5)}`;
    exact.free();
    est.free();
  } catch (e) {
    $("gauss-out").textContent = String(e);
  }
}

async function main() {
  await init();
  $("status").textContent = "Blue: convex optimal body. Red: nonconvex. Dashed: estimate from samples.";
  $("eps").addEventListener("input", updateGmm);
  for (const id of ["s11", "s12", "s22", "m"]) $(id).addEventListener("input", updateGauss);
  $("resample").addEventListener("click", () => { seed += 1; updateGauss(); });
  $("crit").addEventListener("click", () => {
    const t = performance.now();
    const eps = criticalEpsilon(NODES, 1e-4);
    $("crit-out").textContent = `ε*_c ≈ ${eps.toFixed(4)} (${(performance.now() - t).toFixed(0)} ms)`;
    $("eps").value = eps.toFixed(2);
    updateGmm();
  });
  updateGmm();
  updateGauss();
}

main().catch((e) => { $("status").textContent = `failed to load: ${e}`; });
