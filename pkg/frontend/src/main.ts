/** Browser entry point: wires the canvas, shape controls, effector list and
 * scene import to an EditorSession backed by the pose service.
 */

import { OrbitCamera } from "./camera.js";
import { ServiceClient } from "./client.js";
import { pickEffector, renderScene } from "./render.js";
import { EditorSession } from "./session.js";
import type { EffectorKind, Gender, SkeletonJoint } from "./types.js";

const BETA_COUNT = 10;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

async function boot(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("viewport");
  const ctx = canvas.getContext("2d");
  if (!ctx) {
    throw new Error("2d context unavailable");
  }

  const baseUrl = new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8787";
  const client = new ServiceClient(baseUrl);
  const session = new EditorSession(client);
  const camera = new OrbitCamera();

  let joints: SkeletonJoint[] = [];
  try {
    const skeleton = await client.skeleton();
    joints = skeleton.template.joints;
    el("status").textContent = `connected: ${baseUrl}`;
  } catch (error) {
    el("status").textContent = `service unreachable at ${baseUrl}`;
    session.errorMessage = error instanceof Error ? error.message : String(error);
  }

  const draw = () => {
    const w = (canvas.width = canvas.clientWidth);
    const h = (canvas.height = canvas.clientHeight);
    renderScene(ctx, w, h, camera, {
      persons: session.persons,
      selected: session.selected,
      joints,
    });
  };

  const banner = el("error-banner");
  const refreshControls = () => {
    banner.textContent = session.errorMessage ?? "";
    banner.style.display = session.errorMessage ? "block" : "none";
    const shape = session.person.shape;
    for (let i = 0; i < BETA_COUNT; i++) {
      const slider = el<HTMLInputElement>(`beta-${i}`);
      if (document.activeElement !== slider) {
        slider.value = String(shape.betas[i] ?? 0);
      }
    }
    el<HTMLSelectElement>("gender").value = shape.gender;
    el<HTMLInputElement>("scale").value = String(shape.scale);
    renderPersonButtons();
    renderEffectorList();
    el("solve-count").textContent = `${session.solveCount} solves`;
    draw();
  };
  session.onChange = refreshControls;

  // -- camera + effector dragging -----------------------------------------

  let dragging:
    | { kind: "orbit" }
    | { kind: "pan" }
    | { kind: "effector"; index: number }
    | null = null;
  let last: [number, number] = [0, 0];

  canvas.addEventListener("pointerdown", (e) => {
    canvas.setPointerCapture(e.pointerId);
    last = [e.offsetX, e.offsetY];
    const hit = pickEffector(
      camera, session.person, canvas.width, canvas.height, e.offsetX, e.offsetY,
    );
    if (hit >= 0 && e.button === 0 && session.person.effectors[hit].kind !== "rotation") {
      dragging = { kind: "effector", index: hit };
    } else if (e.button === 1 || e.shiftKey) {
      dragging = { kind: "pan" };
    } else {
      dragging = { kind: "orbit" };
    }
  });

  canvas.addEventListener("pointermove", (e) => {
    if (!dragging) {
      return;
    }
    const dx = e.offsetX - last[0];
    const dy = e.offsetY - last[1];
    last = [e.offsetX, e.offsetY];
    if (dragging.kind === "orbit") {
      camera.orbit(-dx * 0.008, dy * 0.006);
      draw();
    } else if (dragging.kind === "pan") {
      camera.pan(-dx * 0.0025 * camera.radius, dy * 0.0025 * camera.radius);
      draw();
    } else {
      const effector = session.person.effectors[dragging.index];
      const anchor = (effector.kind === "position" ? effector.position : effector.target) ?? [0, 1, 0];
      const moved = camera.unprojectDrag(
        [anchor[0], anchor[1], anchor[2]], dx, dy, canvas.width, canvas.height,
      );
      session.dragEffector(dragging.index, moved);
    }
  });

  canvas.addEventListener("pointerup", () => {
    dragging = null;
  });
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    camera.zoom(e.deltaY > 0 ? 1.1 : 1 / 1.1);
    draw();
  });

  // -- shape controls -------------------------------------------------------

  const betaBox = el("betas");
  for (let i = 0; i < BETA_COUNT; i++) {
    const row = document.createElement("label");
    row.innerHTML = `b${i} <input type="range" id="beta-${i}" min="-5" max="5" step="0.05" value="0">`;
    betaBox.appendChild(row);
    row.querySelector("input")!.addEventListener("input", (e) => {
      session.setBeta(i, Number((e.target as HTMLInputElement).value));
    });
  }
  el<HTMLSelectElement>("gender").addEventListener("change", (e) => {
    session.setGender((e.target as HTMLSelectElement).value as Gender);
  });
  el<HTMLInputElement>("scale").addEventListener("input", (e) => {
    session.setScale(Number((e.target as HTMLInputElement).value));
  });

  // -- effector list ---------------------------------------------------------

  const renderEffectorList = () => {
    const box = el("effectors");
    box.textContent = "";
    session.person.effectors.forEach((effector, i) => {
      const row = document.createElement("div");
      row.className = "effector-row";
      const jointName = joints[effector.joint]?.name ?? `#${effector.joint}`;
      row.textContent = `${effector.kind} @ ${jointName}`;
      const remove = document.createElement("button");
      remove.textContent = "x";
      remove.addEventListener("click", () => session.removeEffector(i));
      row.appendChild(remove);
      box.appendChild(row);
    });
  };

  el("add-effector").addEventListener("click", () => {
    const kind = el<HTMLSelectElement>("new-kind").value as EffectorKind;
    const joint = Number(el<HTMLSelectElement>("new-joint").value);
    const at = session.person.positions?.[joint] ?? [0, 1, 0];
    try {
      if (kind === "position") {
        session.addEffector({ kind, joint, position: [...at] });
      } else if (kind === "lookat") {
        session.addEffector({ kind, joint, target: [at[0], at[1], at[2] + 1] });
      } else {
        session.addEffector({ kind, joint, rotation: [1, 0, 0, 0] });
      }
    } catch (error) {
      session.errorMessage = error instanceof Error ? error.message : String(error);
      refreshControls();
    }
  });

  const jointSelect = el<HTMLSelectElement>("new-joint");
  const fillJoints = () => {
    jointSelect.textContent = "";
    joints.forEach((joint, i) => {
      const opt = document.createElement("option");
      opt.value = String(i);
      opt.textContent = joint.name;
      jointSelect.appendChild(opt);
    });
  };
  fillJoints();

  // -- persons / scene --------------------------------------------------------

  const renderPersonButtons = () => {
    const box = el("persons");
    box.textContent = "";
    session.persons.forEach((_, i) => {
      const button = document.createElement("button");
      button.textContent = `person ${i + 1}`;
      button.disabled = i === session.selected;
      button.addEventListener("click", () => session.selectPerson(i));
      box.appendChild(button);
    });
  };

  el<HTMLInputElement>("scene-file").addEventListener("change", async (e) => {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (!file) {
      return;
    }
    try {
      const scene = JSON.parse(await file.text());
      const count = await session.importScene(scene);
      el("status").textContent = `imported ${count} person(s)`;
    } catch (error) {
      session.errorMessage = error instanceof Error ? error.message : String(error);
      refreshControls();
    }
  });

  el("undo").addEventListener("click", () => session.undo());
  el("redo").addEventListener("click", () => session.redo());
  window.addEventListener("keydown", (e) => {
    if ((e.ctrlKey || e.metaKey) && e.key === "z") {
      e.preventDefault();
      if (e.shiftKey) {
        session.redo();
      } else {
        session.undo();
      }
    }
  });

  window.addEventListener("resize", draw);
  refreshControls();
  session.requestSolve(); // populate the initial rest pose from the service
}

boot().catch((error) => {
  const banner = document.getElementById("error-banner");
  if (banner) {
    banner.textContent = String(error);
    banner.style.display = "block";
  }
});
