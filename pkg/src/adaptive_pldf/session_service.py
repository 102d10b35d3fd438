"""Network service hosting live interactive driving sessions.

One WebSocket connection owns one session: the server runs the authoritative
simulation loop, streams decimated state ticks, applies driver inputs, and
runs the learning step between laps. Plain HTTP endpoints expose the route
list, per-iteration profile CSVs, and the learning history. Tick messages are
latest-wins under back-pressure; control replies are never dropped. A dropped
connection aborts the running lap but keeps the learning state reachable for
a reconnect within a timeout.
"""

from __future__ import annotations

import asyncio
import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from aiohttp import WSMsgType, web

from .drive_sim import DriveLog, DriverInputs, LapRunner, SimConfig
from .metrics import intervention_rates
from .pldf_planner import PlannerParams
from .route_map import MPS_TO_KMH, RouteMap, demo_route, load_route_file
from .spaa_core import (
    IterationState,
    StretchParams,
    apply_iteration,
    history_manifest,
    initial_state,
)

CLIENT_TICK_PERIOD = 0.05  # 20 Hz client-facing stream
RECONNECT_TIMEOUT = 60.0  # s to keep a session alive after a drop


@dataclass
class Session:
    session_id: str
    pace: float
    planner: PlannerParams = field(default_factory=PlannerParams)
    spaa: StretchParams = field(default_factory=StretchParams)
    sim_config: SimConfig = field(default_factory=SimConfig)
    route: RouteMap | None = None
    learning: IterationState | None = None
    runner: LapRunner | None = None
    lap_task: asyncio.Task | None = None
    last_log: DriveLog | None = None
    lap_count: int = 0
    gas: float = 0.0
    brake: float = 0.0
    lever_queue: list[int] = field(default_factory=list)
    reactivate_pending: bool = False
    expires_at: float | None = None

    @property
    def lap_running(self) -> bool:
        return self.lap_task is not None and not self.lap_task.done()


def _tick_payload(state) -> dict:
    intervening = (
        state.gas > 0
        or state.brake > 0
        or not state.pldf_active
        or state.set_speed_offset != 0.0
    )
    return {
        "type": "tick",
        "t": state.t,
        "d_m": state.d,
        "v_kmh": state.v * MPS_TO_KMH,
        "target_kmh": state.target_v * MPS_TO_KMH,
        "limit_kmh": state.active_limit * MPS_TO_KMH,
        "offset_kmh": state.set_speed_offset * MPS_TO_KMH,
        "pldf_active": state.pldf_active,
        "intervening": intervening,
    }


def _profile_payload(session: Session) -> dict:
    profile = session.learning.baseline
    return {
        "type": "profile",
        "iteration": session.learning.iteration,
        "points": [
            [float(d), float(v) * MPS_TO_KMH]
            for d, v in zip(profile.distances(), profile.values)
        ],
    }


class Outbox:
    """Single-writer send queue; stale ticks collapse to the latest one."""

    def __init__(self):
        self.queue: asyncio.Queue = asyncio.Queue()
        self._tick_seq = 0

    def push_tick(self, payload: dict):
        self._tick_seq += 1
        self.queue.put_nowait(("tick", self._tick_seq, payload))

    def push(self, payload: dict):
        self.queue.put_nowait(("ctrl", 0, payload))

    async def drain_to(self, ws: web.WebSocketResponse):
        while True:
            kind, seq, payload = await self.queue.get()
            if kind == "tick" and seq < self._tick_seq:
                continue  # a newer tick is already queued: latest wins
            await ws.send_str(json.dumps(payload))


async def _lap_loop(session: Session, outbox: Outbox):
    runner = session.runner
    loop = asyncio.get_running_loop()
    next_wall = loop.time()
    stream_acc = 0.0
    ticks = 0
    while not runner.finished:
        presses = session.lever_queue.pop(0) if session.lever_queue else 0
        reactivate = session.reactivate_pending
        session.reactivate_pending = False
        runner.tick(
            DriverInputs(
                gas=session.gas,
                brake=session.brake,
                lever_presses=presses,
                reactivate=reactivate,
            )
        )
        ticks += 1
        stream_acc += runner.config.dt
        if stream_acc >= CLIENT_TICK_PERIOD - 1e-9:
            stream_acc -= CLIENT_TICK_PERIOD
            outbox.push_tick(_tick_payload(runner.state))
        if session.pace > 0:
            next_wall += runner.config.dt / session.pace
            delay = next_wall - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
        elif ticks % 64 == 0:
            await asyncio.sleep(0)
    log = runner.finalize()
    session.runner = None
    session.gas = 0.0
    session.brake = 0.0
    session.lever_queue.clear()
    session.reactivate_pending = False
    session.lap_count += 1
    if log.complete:
        session.last_log = log
        rates = intervention_rates(log)
        outbox.push(
            {
                "type": "lap_done",
                "lap_id": session.lap_count,
                "aborted": False,
                "rates": {
                    "pedal_ir": rates.pedal_ir,
                    "set_speed_ir": rates.set_speed_ir,
                    "combined_ir": rates.combined_ir,
                    "lap_time_s": rates.lap_time,
                },
            }
        )
    else:
        outbox.push(
            {"type": "lap_done", "lap_id": session.lap_count, "aborted": True, "rates": None}
        )


def _error(outbox: Outbox, code: str, text: str):
    outbox.push({"type": "error", "code": code, "text": text})


def _ack(outbox: Outbox, cmd: str, **extra):
    outbox.push({"type": "ack", "cmd": cmd, **extra})


async def _handle_message(app, session: Session, outbox: Outbox, doc: dict):
    msg_type = doc.get("type")
    if msg_type == "load_route":
        if session.lap_running:
            return _error(outbox, "lap_running", "cannot load a route during a lap")
        name = doc.get("name")
        route = app["routes"].get(name)
        if route is None:
            return _error(outbox, "no_route", f"unknown route {name!r}")
        session.route = route
        session.learning = initial_state(route, session.planner)
        session.last_log = None
        _ack(outbox, "load_route", name=name, length_m=route.length)
        outbox.push(_profile_payload(session))
    elif msg_type == "start_lap":
        if session.route is None:
            return _error(outbox, "no_route", "load a route first")
        if session.lap_running:
            return _error(outbox, "lap_running", "a lap is already running")
        session.runner = LapRunner(
            session.route,
            session.learning.baseline,
            session.sim_config,
            profile_id=f"iter{session.learning.iteration}",
        )
        session.lap_task = asyncio.create_task(_lap_loop(session, outbox))
        _ack(outbox, "start_lap", lap_id=session.lap_count + 1)
    elif msg_type == "input":
        if not session.lap_running:
            return _error(outbox, "no_lap", "no lap is running")
        session.gas = float(doc.get("gas", 0.0))
        session.brake = float(doc.get("brake", 0.0))
        _ack(outbox, "input")
    elif msg_type == "lever":
        if not session.lap_running:
            return _error(outbox, "no_lap", "no lap is running")
        delta = float(doc.get("delta_kmh", 0.0))
        presses = int(round(delta / 5.0))
        if presses:
            session.lever_queue.append(presses)
        _ack(outbox, "lever", delta_kmh=presses * 5.0)
    elif msg_type == "reactivate":
        if not session.lap_running:
            return _error(outbox, "no_lap", "no lap is running")
        session.reactivate_pending = True
        _ack(outbox, "reactivate")
    elif msg_type == "abort_lap":
        if not session.lap_running:
            return _error(outbox, "no_lap", "no lap is running")
        session.runner.abort()
        await session.lap_task
        _ack(outbox, "abort_lap")
    elif msg_type == "apply_spaa":
        if session.lap_running:
            return _error(outbox, "lap_running", "finish the lap first")
        if session.last_log is None:
            return _error(outbox, "no_log", "no completed lap to learn from")
        session.learning = apply_iteration(
            session.learning, session.last_log, session.route, session.spaa, session.planner
        )
        session.last_log = None
        _ack(outbox, "apply_spaa", iteration=session.learning.iteration)
        outbox.push(_profile_payload(session))
    elif msg_type == "reset_learning":
        if session.lap_running:
            return _error(outbox, "lap_running", "finish the lap first")
        if session.route is None:
            return _error(outbox, "no_route", "load a route first")
        session.learning = initial_state(session.route, session.planner)
        session.last_log = None
        _ack(outbox, "reset_learning")
        outbox.push(_profile_payload(session))
    else:
        _error(outbox, "bad_msg", f"unknown message type {msg_type!r}")


async def session_ws(request: web.Request) -> web.WebSocketResponse:
    ws = web.WebSocketResponse(heartbeat=30.0)
    await ws.prepare(request)
    app = request.app
    sessions: dict[str, Session] = app["sessions"]
    session_id = request.query.get("session", "")
    session = sessions.get(session_id)
    if session is None or (session.expires_at and session.expires_at < time.monotonic()):
        session_id = uuid.uuid4().hex[:12]
        session = Session(session_id=session_id, pace=app["pace"])
        session.sim_config = SimConfig(params=session.planner)
        sessions[session_id] = session
    session.expires_at = None
    outbox = Outbox()
    sender = asyncio.create_task(outbox.drain_to(ws))
    _ack(outbox, "connect", session=session_id)
    if session.learning is not None:
        outbox.push(_profile_payload(session))
    try:
        async for msg in ws:
            if msg.type != WSMsgType.TEXT:
                continue
            try:
                doc = json.loads(msg.data)
                if not isinstance(doc, dict):
                    raise ValueError("message must be a JSON object")
            except (json.JSONDecodeError, ValueError) as exc:
                _error(outbox, "bad_msg", f"malformed message: {exc}")
                continue
            try:
                await _handle_message(app, session, outbox, doc)
            except Exception as exc:
                _error(outbox, "bad_msg", f"{type(exc).__name__}: {exc}")
    finally:
        if session.lap_running:
            session.runner.abort()
            try:
                await session.lap_task
            except asyncio.CancelledError:
                pass
        for _ in range(100):  # bounded drain of pending replies
            if outbox.queue.empty() or sender.done():
                break
            await asyncio.sleep(0.01)
        sender.cancel()
        session.expires_at = time.monotonic() + RECONNECT_TIMEOUT
    return ws


def _pick_session(request: web.Request) -> Session | None:
    sessions: dict[str, Session] = request.app["sessions"]
    sid = request.query.get("session")
    if sid:
        return sessions.get(sid)
    live = [s for s in sessions.values() if s.learning is not None]
    return live[-1] if live else None


async def get_routes(request: web.Request) -> web.Response:
    routes = request.app["routes"]
    return web.json_response(
        [{"name": name, "length_m": r.length} for name, r in sorted(routes.items())]
    )


async def get_profile(request: web.Request) -> web.Response:
    session = _pick_session(request)
    if session is None or session.learning is None:
        raise web.HTTPNotFound(text="no active session with a loaded route")
    iteration = int(request.match_info["iteration"])
    for entry in session.learning.history:
        if entry.iteration == iteration:
            return web.Response(text=entry.profile.to_csv(), content_type="text/csv")
    raise web.HTTPNotFound(text=f"no iteration {iteration}")


async def get_history(request: web.Request) -> web.Response:
    session = _pick_session(request)
    if session is None or session.learning is None:
        raise web.HTTPNotFound(text="no active session with a loaded route")
    return web.json_response(history_manifest(session.learning))


def load_routes(route_dir: str | None) -> dict[str, RouteMap]:
    routes: dict[str, RouteMap] = {}
    demo = demo_route()
    routes[demo.name] = demo
    if route_dir:
        for path in sorted(Path(route_dir).glob("*.json")):
            route = load_route_file(path)
            routes[route.name] = route
    return routes


def create_app(route_dir: str | None = None, pace: float = 1.0, ui_dir: str | None = None) -> web.Application:
    app = web.Application()
    app["routes"] = load_routes(route_dir)
    app["sessions"] = {}
    app["pace"] = pace
    app.router.add_get("/routes", get_routes)
    app.router.add_get("/profile/{iteration}", get_profile)
    app.router.add_get("/history", get_history)
    app.router.add_get("/session", session_ws)
    if ui_dir:
        app.router.add_static("/ui", ui_dir, show_index=True)
    return app


def serve(port: int = 8700, route_dir: str | None = None, pace: float = 1.0, ui_dir: str | None = None):
    web.run_app(create_app(route_dir, pace, ui_dir), port=port)
