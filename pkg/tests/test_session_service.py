from __future__ import annotations

import asyncio
import json

import numpy as np
import pytest
from aiohttp.test_utils import TestClient, TestServer

from adaptive_pldf.drive_sim import drive_log_to_json, replay_log
from adaptive_pldf.pldf_planner import PlannerParams
from adaptive_pldf.route_map import serialize_route
from adaptive_pldf.session_service import create_app
from adaptive_pldf.spaa_core import StretchParams, apply_iteration, initial_state

from conftest import make_route

MINI_ROUTE = make_route([(0, 80), (250, 100)], 500, name="mini")


@pytest.fixture()
def route_dir(tmp_path):
    (tmp_path / "mini.json").write_text(serialize_route(MINI_ROUTE))
    return tmp_path


async def recv_until(ws, want_type, timeout=30.0, collect=None):
    while True:
        msg = await asyncio.wait_for(ws.receive(), timeout)
        if msg.data is None:
            raise AssertionError(f"socket closed while waiting for {want_type}")
        doc = json.loads(msg.data)
        if collect is not None:
            collect.append(doc)
        if doc["type"] == want_type:
            return doc
        if doc["type"] == "error" and want_type != "error":
            raise AssertionError(f"unexpected error: {doc}")


async def start_client(route_dir):
    app = create_app(route_dir=str(route_dir), pace=0)
    client = TestClient(TestServer(app))
    await client.start_server()
    return client


def run(coro):
    return asyncio.run(coro)


def test_clean_lap_zero_rates(route_dir):
    async def scenario():
        client = await start_client(route_dir)
        try:
            ws = await client.ws_connect("/session")
            hello = await recv_until(ws, "ack")
            assert hello["cmd"] == "connect"
            await ws.send_json({"type": "load_route", "name": "mini"})
            profile_msg = await recv_until(ws, "profile")
            assert profile_msg["iteration"] == 0
            assert len(profile_msg["points"]) == 501
            await ws.send_json({"type": "start_lap"})
            ticks = []
            done = await recv_until(ws, "lap_done", collect=ticks)
            assert done["rates"] == {
                "pedal_ir": 0.0,
                "set_speed_ir": 0.0,
                "combined_ir": 0.0,
                "lap_time_s": done["rates"]["lap_time_s"],
            }
            assert not done["aborted"]
            tick_ts = [t["t"] for t in ticks if t["type"] == "tick"]
            assert tick_ts == sorted(tick_ts)
            await ws.close()
        finally:
            await client.close()

    run(scenario())


def test_gas_pulse_profile_matches_direct_computation(route_dir):
    async def scenario():
        client = await start_client(route_dir)
        try:
            ws = await client.ws_connect("/session")
            await recv_until(ws, "ack")
            await ws.send_json({"type": "load_route", "name": "mini"})
            await recv_until(ws, "profile")
            await ws.send_json({"type": "start_lap"})
            await recv_until(ws, "ack")
            # hold the gas from early in the lap to its end: one gas record
            await ws.send_json({"type": "input", "gas": 0.6, "brake": 0.0})
            await recv_until(ws, "ack")
            done = await recv_until(ws, "lap_done", timeout=60)
            assert done["rates"]["pedal_ir"] > 0

            session = list(client.server.app["sessions"].values())[0]
            log = session.last_log
            assert log is not None and log.complete
            assert log.records("gas")

            # replay reproduces the network-driven lap bit-exactly
            replayed = replay_log(MINI_ROUTE, session.learning.baseline, log)
            assert drive_log_to_json(replayed) == drive_log_to_json(log)

            expected = apply_iteration(
                initial_state(MINI_ROUTE, session.planner),
                log,
                MINI_ROUTE,
                session.spaa,
                session.planner,
            ).baseline

            await ws.send_json({"type": "apply_spaa"})
            pushed = await recv_until(ws, "profile")
            assert pushed["iteration"] == 1
            got = np.array([v / 3.6 for _, v in pushed["points"]])
            assert np.max(np.abs(got - expected.values)) <= 1e-9

            # HTTP endpoints expose the same learning state
            resp = await client.get("/profile/1")
            assert resp.status == 200
            body = await resp.text()
            assert body == expected.to_csv()
            resp = await client.get("/history")
            hist = await resp.json()
            assert hist["iteration"] == 1
            assert [it["iteration"] for it in hist["iterations"]] == [0, 1]
            await ws.close()
        finally:
            await client.close()

    run(scenario())


def test_error_codes(route_dir):
    async def scenario():
        client = await start_client(route_dir)
        try:
            ws = await client.ws_connect("/session")
            await recv_until(ws, "ack")
            await ws.send_json({"type": "input", "gas": 1.0})
            err = await recv_until(ws, "error")
            assert err["code"] == "no_lap"
            await ws.send_json({"type": "load_route", "name": "nope"})
            err = await recv_until(ws, "error")
            assert err["code"] == "no_route"
            await ws.send_str("{malformed")
            err = await recv_until(ws, "error")
            assert err["code"] == "bad_msg"
            # session survives malformed input
            await ws.send_json({"type": "load_route", "name": "mini"})
            await recv_until(ws, "profile")
            await ws.send_json({"type": "start_lap"})
            await ws.send_json({"type": "apply_spaa"})
            err = await recv_until(ws, "error")
            assert err["code"] == "lap_running"
            await recv_until(ws, "lap_done", timeout=60)
            await ws.close()
        finally:
            await client.close()

    run(scenario())


def test_abort_lap(route_dir):
    async def scenario():
        client = await start_client(route_dir)
        try:
            ws = await client.ws_connect("/session")
            await recv_until(ws, "ack")
            await ws.send_json({"type": "load_route", "name": "mini"})
            await recv_until(ws, "profile")
            await ws.send_json({"type": "start_lap"})
            await recv_until(ws, "tick")
            await ws.send_json({"type": "abort_lap"})
            done = await recv_until(ws, "lap_done")
            assert done["aborted"] is True
            await ws.send_json({"type": "apply_spaa"})
            err = await recv_until(ws, "error")
            assert err["code"] == "no_log"  # aborted laps are not learned from
            await ws.close()
        finally:
            await client.close()

    run(scenario())


def test_two_sessions_isolated(route_dir):
    async def scenario():
        client = await start_client(route_dir)
        try:
            ws1 = await client.ws_connect("/session")
            ws2 = await client.ws_connect("/session")
            await recv_until(ws1, "ack")
            await recv_until(ws2, "ack")
            for ws in (ws1, ws2):
                await ws.send_json({"type": "load_route", "name": "mini"})
                await recv_until(ws, "profile")
            await ws1.send_json({"type": "start_lap"})
            await ws1.send_json({"type": "input", "gas": 0.7})
            await recv_until(ws1, "lap_done", timeout=60)
            await ws1.send_json({"type": "apply_spaa"})
            pushed = await recv_until(ws1, "profile")
            assert pushed["iteration"] == 1
            # session 2 is untouched
            resp = await client.get("/history", params={"session": _sid(client, ws2)})
            hist = await resp.json()
            assert hist["iteration"] == 0
            await ws1.close()
            await ws2.close()
        finally:
            await client.close()

    def _sid(client, ws):
        sessions = client.server.app["sessions"]
        for sid, s in sessions.items():
            if s.learning is not None and s.learning.iteration == 0:
                return sid
        raise AssertionError("no untouched session found")

    run(scenario())


def test_reconnect_preserves_learning(route_dir):
    async def scenario():
        client = await start_client(route_dir)
        try:
            ws = await client.ws_connect("/session")
            hello = await recv_until(ws, "ack")
            sid = hello["session"]
            await ws.send_json({"type": "load_route", "name": "mini"})
            await recv_until(ws, "profile")
            await ws.send_json({"type": "start_lap"})
            await recv_until(ws, "lap_done", timeout=60)
            await ws.send_json({"type": "apply_spaa"})
            await recv_until(ws, "profile")
            await ws.close()

            ws2 = await client.ws_connect(f"/session?session={sid}")
            hello2 = await recv_until(ws2, "ack")
            assert hello2["session"] == sid
            profile_msg = await recv_until(ws2, "profile")
            assert profile_msg["iteration"] == 1
            await ws2.close()
        finally:
            await client.close()

    run(scenario())


def test_disconnect_aborts_running_lap(route_dir):
    async def scenario():
        client = await start_client(route_dir)
        try:
            ws = await client.ws_connect("/session")
            hello = await recv_until(ws, "ack")
            sid = hello["session"]
            await ws.send_json({"type": "load_route", "name": "mini"})
            await recv_until(ws, "profile")
            await ws.send_json({"type": "start_lap"})
            await recv_until(ws, "tick")
            await ws.close()
            session = client.server.app["sessions"][sid]
            for _ in range(100):
                if not session.lap_running:
                    break
                await asyncio.sleep(0.02)
            assert not session.lap_running
            assert session.learning is not None  # state preserved for reconnect
        finally:
            await client.close()

    run(scenario())


def test_routes_endpoint(route_dir):
    async def scenario():
        client = await start_client(route_dir)
        try:
            resp = await client.get("/routes")
            routes = await resp.json()
            names = {r["name"] for r in routes}
            assert {"mini", "rural-demo"} <= names
        finally:
            await client.close()

    run(scenario())


def test_lever_and_reactivate_round_trip(route_dir):
    async def scenario():
        client = await start_client(route_dir)
        try:
            ws = await client.ws_connect("/session")
            await recv_until(ws, "ack")
            await ws.send_json({"type": "load_route", "name": "mini"})
            await recv_until(ws, "profile")
            await ws.send_json({"type": "start_lap"})
            await recv_until(ws, "tick")
            await ws.send_json({"type": "lever", "delta_kmh": 5})
            ack = await recv_until(ws, "ack")
            assert ack["cmd"] == "lever"
            saw_offset = False
            for _ in range(200):
                doc = await recv_until(ws, "tick", timeout=60)
                if doc["offset_kmh"] > 4.9:
                    saw_offset = True
                    assert doc["intervening"]
                    break
                if doc["d_m"] > 240:
                    break
            assert saw_offset
            await recv_until(ws, "lap_done", timeout=60)
            session = list(client.server.app["sessions"].values())[0]
            assert session.last_log.records("set_speed")
            await ws.close()
        finally:
            await client.close()

    run(scenario())
