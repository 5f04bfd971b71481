/** Editor state: persons, the current effector set and shape, undo, and the
 * solve loop. Every displayed pose (and every joint position used by the
 * renderer) came from the service; nothing kinematic happens here.
 */

import { SolveScheduler } from "./scheduler.js";
import type { BootstrapRequest, SolveRequest } from "./client.js";
import type {
  BootstrapResponse,
  EffectorWire,
  Gender,
  PersonState,
  SolveResponse,
} from "./types.js";
import { clonePerson, neutralShape } from "./types.js";

/** The slice of ServiceClient the session needs; tests inject fakes. */
export interface SolverBackend {
  solve(body: SolveRequest): Promise<SolveResponse>;
  bootstrap(body: BootstrapRequest): Promise<BootstrapResponse>;
}

export const DEFAULT_MAX_UNDO = 100;

interface Snapshot {
  person: number;
  state: PersonState;
}

interface RoutedBody {
  person: number;
  solve: SolveRequest;
}

interface RoutedResult {
  person: number;
  response: SolveResponse;
}

export interface SessionOptions {
  debounceMs?: number;
  maxUndo?: number;
}

export class EditorSession {
  persons: PersonState[] = [defaultPerson()];
  selected = 0;
  errorMessage: string | null = null;
  sceneSource: string | null = null;
  /** completed solves, for status display */
  solveCount = 0;
  onChange: (() => void) | null = null;

  readonly maxUndo: number;
  readonly scheduler: SolveScheduler<RoutedBody, RoutedResult>;
  private undoStack: Snapshot[] = [];
  private redoStack: Snapshot[] = [];
  private pendingUndo: Snapshot | null = null;

  constructor(
    private readonly backend: SolverBackend,
    options: SessionOptions = {},
  ) {
    this.maxUndo = options.maxUndo ?? DEFAULT_MAX_UNDO;
    this.scheduler = new SolveScheduler<RoutedBody, RoutedResult>({
      debounceMs: options.debounceMs,
      send: async (body) => ({
        person: body.person,
        response: await this.backend.solve(body.solve),
      }),
      apply: (result) => this.applySolve(result),
      onError: (error) => this.failSolve(error),
    });
  }

  get person(): PersonState {
    return this.persons[this.selected];
  }

  get pose() {
    return this.person.pose;
  }

  get undoDepth(): number {
    return this.undoStack.length;
  }

  get redoDepth(): number {
    return this.redoStack.length;
  }

  // -- edits ---------------------------------------------------------------

  dragEffector(index: number, point: number[]): void {
    const effector = this.person.effectors[index];
    if (!effector) {
      throw new Error(`no effector at index ${index}`);
    }
    if (effector.kind === "rotation") {
      throw new Error("rotation effectors take quaternions, not drag points");
    }
    this.beginEdit();
    const field = effector.kind === "position" ? "position" : "target";
    effector[field] = [...point];
    this.edited();
  }

  setEffectorRotation(index: number, wxyz: number[]): void {
    const effector = this.person.effectors[index];
    if (!effector || effector.kind !== "rotation") {
      throw new Error(`effector ${index} is not a rotation constraint`);
    }
    this.beginEdit();
    effector.rotation = [...wxyz];
    this.edited();
  }

  addEffector(effector: EffectorWire): void {
    const duplicate = this.person.effectors.some(
      (e) => e.kind === effector.kind && e.joint === effector.joint,
    );
    if (duplicate) {
      throw new Error(`duplicate effector (${effector.kind}, ${effector.joint})`);
    }
    this.beginEdit();
    this.person.effectors.push(JSON.parse(JSON.stringify(effector)) as EffectorWire);
    this.edited();
  }

  removeEffector(index: number): void {
    if (index < 0 || index >= this.person.effectors.length) {
      throw new Error(`no effector at index ${index}`);
    }
    this.beginEdit();
    this.person.effectors.splice(index, 1);
    this.edited();
  }

  setBeta(index: number, value: number): void {
    if (index < 0 || index >= this.person.shape.betas.length) {
      throw new Error(`beta index ${index} out of range`);
    }
    this.beginEdit();
    this.person.shape.betas[index] = value;
    this.edited();
  }

  setGender(gender: Gender): void {
    this.beginEdit();
    this.person.shape.gender = gender;
    this.edited();
  }

  setScale(scale: number): void {
    this.beginEdit();
    this.person.shape.scale = scale;
    this.edited();
  }

  /** Solve the current state as-is (startup, person switch with no pose). */
  requestSolve(): void {
    this.schedule();
  }

  // -- undo ----------------------------------------------------------------

  undo(): boolean {
    const snapshot = this.undoStack.pop();
    if (!snapshot) {
      return false;
    }
    this.redoStack.push(this.snapshotOf(snapshot.person));
    this.persons[snapshot.person] = snapshot.state;
    this.pendingUndo = null;
    this.notify();
    return true;
  }

  redo(): boolean {
    const snapshot = this.redoStack.pop();
    if (!snapshot) {
      return false;
    }
    this.undoStack.push(this.snapshotOf(snapshot.person));
    this.persons[snapshot.person] = snapshot.state;
    this.notify();
    return true;
  }

  // -- persons / scenes -----------------------------------------------------

  selectPerson(index: number): void {
    if (index < 0 || index >= this.persons.length) {
      throw new Error(`no person ${index}`);
    }
    this.selected = index;
    this.notify();
  }

  async importScene(
    scene: unknown,
    options: Omit<BootstrapRequest, "scene"> = {},
  ): Promise<number> {
    const response = await this.backend.bootstrap({ scene, ...options });
    this.persons = response.persons.map((p) => ({
      shape: p.shape ?? neutralShape(),
      effectors: p.recovery.effectors.map(
        (e) => JSON.parse(JSON.stringify(e)) as EffectorWire,
      ),
      pose: p.pose ?? null,
      positions: p.positions ?? null,
    }));
    if (this.persons.length === 0) {
      this.persons = [defaultPerson()];
    }
    this.selected = 0;
    this.sceneSource = response.source;
    this.undoStack = [];
    this.redoStack = [];
    this.pendingUndo = null;
    this.errorMessage = null;
    this.notify();
    return this.persons.length;
  }

  // -- internals -------------------------------------------------------------

  /** Capture the undo snapshot for this burst before the state mutates. */
  private beginEdit(): void {
    if (this.pendingUndo === null) {
      this.pendingUndo = this.snapshotOf(this.selected);
    }
  }

  private edited(): void {
    this.redoStack = [];
    this.schedule();
    this.notify();
  }

  private schedule(): void {
    this.scheduler.request({
      person: this.selected,
      solve: {
        shape: JSON.parse(JSON.stringify(this.person.shape)),
        effectors: JSON.parse(JSON.stringify(this.person.effectors)),
      },
    });
  }

  private applySolve(result: RoutedResult): void {
    const person = this.persons[result.person];
    if (!person) {
      return; // scene replaced while the request was out
    }
    if (this.pendingUndo !== null) {
      this.undoStack.push(this.pendingUndo);
      this.pendingUndo = null;
      if (this.undoStack.length > this.maxUndo) {
        this.undoStack.splice(0, this.undoStack.length - this.maxUndo);
      }
    }
    person.pose = result.response.pose;
    person.positions = result.response.positions;
    this.errorMessage = null;
    this.solveCount += 1;
    this.notify();
  }

  private failSolve(error: unknown): void {
    this.errorMessage = error instanceof Error ? error.message : String(error);
    this.notify();
  }

  private snapshotOf(person: number): Snapshot {
    return { person, state: clonePerson(this.persons[person]) };
  }

  private notify(): void {
    this.onChange?.();
  }
}

function defaultPerson(): PersonState {
  return { shape: neutralShape(), effectors: [], pose: null, positions: null };
}
