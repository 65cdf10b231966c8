import init, { Session, bundledScenario } from "./pkg/dvi_web.js";

const $ = (id) => document.getElementById(id);
let session = null;

function status(msg) {
  $("status").textContent = msg || "";
}

function guard(fn) {
  try {
    status("");
    fn();
  } catch (e) {
    status(String(e));
  }
}

function selectedPoint() {
  const [bus, phase] = $("point").value.split(":");
  return { bus: Number(bus), phase };
}

function fillPoints() {
  const previous = $("point").value || "7:c";
  const points = JSON.parse(session.points());
  $("point").innerHTML = points
    .map(([b, p]) => `<option value="${b}:${p}">${b}${p}</option>`)
    .join("");
  if (points.some(([b, p]) => `${b}:${p}` === previous)) $("point").value = previous;
}

function drawRanking(result) {
  const [bus, phase] = result.observation;
  $("rank-title").textContent = `Ranking at ${bus}${phase} (${result.metric})`;
  $("ranking").tBodies[0].innerHTML = result.entries
    .map((e) => {
      const d = e.distance === null ? "inf" : e.distance.toExponential(3);
      const w = Math.round(160 * Math.max(0, e.vis));
      return `<tr><td>${e.rank}</td><td>${e.actor}</td><td>${d}</td>` +
        `<td>${e.vis.toFixed(3)}</td><td class="bar"><span style="width:${w}px"></span></td></tr>`;
    })
    .join("");
}

function ellipsePath(ctx, e, toPx, scale) {
  const [cx, cy] = toPx(e.center[0], e.center[1]);
  ctx.beginPath();
  ctx.ellipse(cx, cy, Math.max(e.major * scale, 0.5), Math.max(e.minor * scale, 0.5), -e.angle, 0, 2 * Math.PI);
}

function drawEllipses(set, top) {
  const canvas = $("ellipses");
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const all = set.actors.map((a) => a.ellipse).concat([set.aggregate]);
  let extent = 0;
  for (const e of all) {
    extent = Math.max(extent, Math.abs(e.center[0]) + e.major, Math.abs(e.center[1]) + e.major);
  }
  extent = extent > 0 ? extent * 1.1 : 1;
  const scale = (Math.min(width, height) / 2) / extent;
  const toPx = (x, y) => [width / 2 + x * scale, height / 2 - y * scale];

  ctx.strokeStyle = "#ccc";
  ctx.beginPath();
  ctx.moveTo(0, height / 2); ctx.lineTo(width, height / 2);
  ctx.moveTo(width / 2, 0); ctx.lineTo(width / 2, height);
  ctx.stroke();
  ctx.fillStyle = "#888";
  ctx.font = "11px sans-serif";
  ctx.fillText(`±${extent.toPrecision(2)} V`, 6, 14);

  for (const a of set.actors) {
    const highlight = a.actor === top;
    ctx.strokeStyle = highlight ? "#d8573b" : "rgba(59,125,216,0.55)";
    ctx.lineWidth = highlight ? 2.5 : 1;
    ellipsePath(ctx, a.ellipse, toPx, scale);
    ctx.stroke();
  }
  ctx.strokeStyle = "#111";
  ctx.lineWidth = 3;
  ellipsePath(ctx, set.aggregate, toPx, scale);
  ctx.stroke();
}

function drawMeanVis(rows, metric) {
  const canvas = $("meanvis");
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  $("mean-title").textContent = `Mean VIS over all observation points (${metric.toUpperCase()})`;
  const pad = 28;
  const slot = (width - 2 * pad) / rows.length;
  ctx.font = "11px sans-serif";
  ctx.textAlign = "center";
  rows.forEach((r, i) => {
    const h = (height - 2 * pad) * r.mean_vis;
    const x = pad + i * slot;
    ctx.fillStyle = "#3b7dd8";
    ctx.fillRect(x + 3, height - pad - h, slot - 6, h);
    ctx.fillStyle = "#222";
    ctx.fillText(String(r.actor), x + slot / 2, height - pad + 14);
    ctx.fillText(r.mean_vis.toFixed(2), x + slot / 2, height - pad - h - 4);
  });
}

function rank() {
  guard(() => {
    const { bus, phase } = selectedPoint();
    const metric = $("metric").value;
    const result = JSON.parse(session.rank(bus, phase, metric));
    drawRanking(result);
    drawEllipses(JSON.parse(session.ellipses(bus, phase)), result.entries[0].actor);
  });
}

function meanVis() {
  guard(() => {
    const metric = $("metric").value;
    drawMeanVis(JSON.parse(session.meanVis(metric)), metric);
  });
}

function load(text) {
  guard(() => {
    const next = new Session(text);
    if (session) session.free();
    session = next;
    fillPoints();
    rank();
  });
}

await init();
$("scenario").value = bundledScenario();
load("");
$("run").addEventListener("click", rank);
$("point").addEventListener("change", rank);
$("metric").addEventListener("change", rank);
$("mean").addEventListener("click", meanVis);
$("reload").addEventListener("click", () => load($("scenario").value));
