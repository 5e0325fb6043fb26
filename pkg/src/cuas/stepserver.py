"""Reset/step protocol over newline-delimited JSON frames.

One environment per connection (trainers open k connections for k-way
vectorization). Requests: {"cmd": "spec" | "reset" | "step" | "close"} with
"seed" for reset and "action" (M ints) for step. Every request gets exactly
one response frame, in order. Malformed frames produce an error response
and the session continues; transport loss discards the episode.
"""

from __future__ import annotations

import json
import socketserver
import sys
import threading

from .encoding import ObservationSpec
from .scenario import ScenarioConfig, config_fingerprint, sample_episode
from .session import EpisodeSession


def _spec_response(config: ScenarioConfig) -> dict:
    spec = ObservationSpec.from_config(config)
    return {
        "spec": {
            **spec.to_dict(),
            "action_dims": [config.n_effectors, config.n_drones],
            "decision_interval": config.decision_interval,
            "config_fingerprint": config_fingerprint(config),
        }
    }


def _step_response(obs, mask, reward: float, terminated: bool, info: dict) -> dict:
    return {
        "observation": [float(v) for v in obs],
        "mask": [[bool(v) for v in row] for row in mask],
        "reward": float(reward),
        "terminated": bool(terminated),
        "info": info,
    }


class ProtocolSession:
    """State machine behind one connection; dispatches one request frame."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.session: EpisodeSession | None = None
        self.closed = False

    def handle_line(self, line: str) -> dict:
        line = line.strip()
        if not line:
            return {"error": "empty frame"}
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as e:
            return {"error": f"malformed frame: {e.msg}"}
        if not isinstance(msg, dict) or "cmd" not in msg:
            return {"error": "frame must be an object with a 'cmd' field"}
        cmd = msg["cmd"]
        if cmd == "spec":
            return _spec_response(self.config)
        if cmd == "reset":
            return self._reset(msg)
        if cmd == "step":
            return self._step(msg)
        if cmd == "close":
            self.closed = True
            return {"ok": True}
        return {"error": f"unknown cmd '{cmd}'"}

    def _reset(self, msg: dict) -> dict:
        if "seed" not in msg:
            return {"error": "reset requires a 'seed' field"}
        try:
            seed = int(msg["seed"])
        except (TypeError, ValueError):
            return {"error": "seed must be an integer"}
        setup = sample_episode(self.config, seed)
        self.session = EpisodeSession(self.config, setup, seed)
        obs, mask = self.session.reset()
        return _step_response(obs, mask, 0.0, False, self.session.info())

    def _step(self, msg: dict) -> dict:
        if self.session is None:
            return {"error": "no episode; send reset first"}
        if self.session.terminated:
            return {"error": "episode terminated; send reset"}
        action = msg.get("action")
        m = self.config.n_effectors
        n = self.config.n_drones
        if (not isinstance(action, list) or len(action) != m
                or not all(isinstance(a, int) for a in action)):
            return {"error": f"action must be a list of {m} integers"}
        if not all(0 <= a < n for a in action):
            return {"error": f"action indices must be in [0, {n})"}
        reward, terminated, info = self.session.step(action)
        return _step_response(self.session.observation(), self.session.mask(),
                              reward, terminated, info)


def serve_lines(lines_in, lines_out, config: ScenarioConfig) -> None:
    """Run one protocol session over text streams until close/EOF."""
    session = ProtocolSession(config)
    for line in lines_in:
        response = session.handle_line(line)
        lines_out.write(json.dumps(response, separators=(",", ":")))
        lines_out.write("\n")
        lines_out.flush()
        if session.closed:
            break


def serve_stdio(config: ScenarioConfig) -> None:
    serve_lines(sys.stdin, sys.stdout, config)


def serve_tcp(config: ScenarioConfig, host: str = "127.0.0.1", port: int = 0,
              max_connections: int = 64, ready_event: threading.Event | None = None,
              bound_port: list | None = None) -> None:
    """Blocking TCP server; each connection gets an independent session."""
    gate = threading.BoundedSemaphore(max_connections)

    class Handler(socketserver.StreamRequestHandler):
        def handle(self) -> None:
            if not gate.acquire(blocking=False):
                self.wfile.write(b'{"error":"server at connection capacity"}\n')
                return
            try:
                reader = (raw.decode() for raw in self.rfile)
                serve_lines(reader, _TextOut(self.wfile), config)
            except (BrokenPipeError, ConnectionResetError):
                pass  # client vanished; drop the episode
            finally:
                gate.release()

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with Server((host, port), Handler) as server:
        if bound_port is not None:
            bound_port.append(server.server_address[1])
        if ready_event is not None:
            ready_event.set()
        server.serve_forever()


class _TextOut:
    def __init__(self, binary):
        self._binary = binary

    def write(self, text: str) -> None:
        self._binary.write(text.encode())

    def flush(self) -> None:
        self._binary.flush()
