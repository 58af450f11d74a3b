import init, { board, simulate, fit } from "../pkg/teachsim_web.js";

const CONDITIONS = ["Solo-Full", "Solo-Partial", "Demo-Full", "Demo-Partial", "Chat-Full", "Chat-Partial"];
const PALETTE = { cyan: "#35d0e0", white: "#f2f2f2", yellow: "#f5d142", pink: "#f27ec0" };
const CURVE_COLORS = ["#333", "#999", "#1f77b4", "#9ecae1", "#d62728", "#ff9896"];
const FEATURES = [
  "cyan", "white", "yellow", "pink", "circle", "square", "triangle",
  "cyan_circle", "cyan_square", "cyan_triangle", "white_circle", "white_square", "white_triangle",
  "yellow_circle", "yellow_square", "yellow_triangle", "pink_circle", "pink_square", "pink_triangle",
];
const CELL = 24;
const $ = (id) => document.getElementById(id);

const theta = new Array(FEATURES.length).fill(0);

function buildSliders() {
  const box = $("sliders");
  FEATURES.forEach((name, i) => {
    const label = document.createElement("span");
    label.textContent = name;
    const input = document.createElement("input");
    Object.assign(input, { type: "range", min: -5, max: 5, step: 0.1, value: 0 });
    const out = document.createElement("span");
    out.textContent = "0.0";
    input.addEventListener("input", () => {
      theta[i] = Number(input.value);
      out.textContent = theta[i].toFixed(1);
      drawBoard();
    });
    box.append(label, input, out);
  });
}

function shapePath(ctx, shape, x, y, r) {
  ctx.beginPath();
  if (shape === "circle") ctx.arc(x, y, r, 0, 2 * Math.PI);
  else if (shape === "square") ctx.rect(x - r, y - r, 2 * r, 2 * r);
  else {
    ctx.moveTo(x, y - r);
    ctx.lineTo(x + r, y + r);
    ctx.lineTo(x - r, y + r);
    ctx.closePath();
  }
}

function drawBoard() {
  let report;
  try {
    report = JSON.parse(board(Number($("b-seed").value), Number($("b-trial").value), JSON.stringify(theta), $("b-cb").checked));
  } catch (e) {
    $("b-info").innerHTML = `<span class="err">${e}</span>`;
    return;
  }
  const ctx = $("board").getContext("2d");
  ctx.clearRect(0, 0, 480, 480);
  const picks = new Map(report.pick_probabilities);
  const centers = [[0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]];
  for (const o of report.board.objects) {
    const [r, c] = o.pos;
    const x = c * CELL + CELL / 2;
    const y = r * CELL + CELL / 2;
    centers[o.cluster][1] += x;
    centers[o.cluster][2] += y;
    ctx.globalAlpha = 0.35 + 0.65 * picks.get(o.id);
    shapePath(ctx, o.shape, x, y, CELL * 0.38);
    ctx.fillStyle = PALETTE[o.color];
    ctx.fill();
    ctx.globalAlpha = 1;
    if ($("b-values").checked) {
      ctx.fillStyle = "#000";
      ctx.font = "10px sans-serif";
      ctx.textAlign = "center";
      ctx.fillText(o.value, x, y + 4);
    }
  }
  ctx.font = "bold 13px sans-serif";
  ctx.fillStyle = "#fff";
  for (const [k, sx, sy] of centers) {
    ctx.fillText(`${(100 * report.cluster_probabilities[k]).toFixed(1)}%`, sx / 5, sy / 5 - CELL * 1.6);
  }
  $("b-info").textContent =
    `Cluster probabilities: ${report.cluster_probabilities.map((p) => p.toFixed(3)).join(", ")}. ` +
    `Optimal play: cluster ${report.optimal_cluster}, ${report.optimal_score} points. Object opacity shows pick probability.`;
}

function runSimulation() {
  let rows;
  try {
    rows = JSON.parse(simulate(Number($("s-seed").value), Number($("s-dyads").value)));
  } catch (e) {
    $("s-table").innerHTML = `<tr><td class="err">${e}</td></tr>`;
    return;
  }
  $("s-table").innerHTML =
    "<tr><th>condition</th><th>mean</th><th>sd</th></tr>" +
    rows.map((r, i) => `<tr><td style="color:${CURVE_COLORS[i]}">${r.condition}</td><td>${r.mean.toFixed(1)}</td><td>${r.sd.toFixed(1)}</td></tr>`).join("");
  const svg = $("s-curves");
  const w = 420, h = 240, pad = 30;
  const all = rows.flatMap((r) => r.curve);
  const lo = Math.min(0, ...all), hi = Math.max(...all);
  const sx = (t) => pad + (t * (w - 2 * pad)) / 9;
  const sy = (v) => h - pad - ((v - lo) * (h - 2 * pad)) / (hi - lo || 1);
  svg.innerHTML =
    `<line x1="${pad}" y1="${sy(0)}" x2="${w - pad}" y2="${sy(0)}" stroke="#ccc"/>` +
    `<text x="${pad}" y="${h - 8}" font-size="11">trial 1</text><text x="${w - pad - 30}" y="${h - 8}" font-size="11">trial 10</text>` +
    rows.map((r, i) =>
      `<polyline fill="none" stroke="${CURVE_COLORS[i]}" stroke-width="2" points="${r.curve.map((v, t) => `${sx(t)},${sy(v)}`).join(" ")}"/>`
    ).join("");
}

function runFit() {
  let r;
  try {
    r = JSON.parse(fit($("f-cond").value, Number($("f-seed").value), Number($("f-window").value), Number($("f-lambda").value)));
  } catch (e) {
    $("f-info").innerHTML = `<span class="err">${e}</span>`;
    $("f-table").innerHTML = "";
    return;
  }
  $("f-info").textContent =
    `${r.condition}: final score ${r.final_score} (per trial ${r.scores.join(", ")}); ` +
    `log posterior ${r.log_posterior.toFixed(3)}${r.converged ? "" : " (not converged)"}`;
  const scale = Math.max(...r.theta.map(Math.abs), 1e-9);
  $("f-table").innerHTML = r.features.map((name, i) => {
    const v = r.theta[i];
    const width = (80 * Math.abs(v)) / scale;
    const color = v >= 0 ? "#2a9d8f" : "#e76f51";
    return `<tr><td>${name}</td><td>${v.toFixed(3)}</td><td style="text-align:left"><span class="bar" style="width:${width}px;background:${color}"></span></td></tr>`;
  }).join("");
}

await init();
buildSliders();
for (const c of CONDITIONS) $("f-cond").append(new Option(c, c));
$("f-cond").value = "Chat-Full";
for (const id of ["b-seed", "b-trial", "b-cb", "b-values"]) $(id).addEventListener("input", drawBoard);
$("b-reset").addEventListener("click", () => {
  theta.fill(0);
  document.querySelectorAll("#sliders input").forEach((s) => (s.value = 0));
  document.querySelectorAll("#sliders span:nth-child(3n)").forEach((s) => (s.textContent = "0.0"));
  drawBoard();
});
$("s-run").addEventListener("click", runSimulation);
$("f-run").addEventListener("click", runFit);
drawBoard();
