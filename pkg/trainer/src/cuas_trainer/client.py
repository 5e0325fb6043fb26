"""Step-protocol clients: one environment per connection, vectorized pool.

Environments are reached only through the newline-JSON protocol, either by
spawning `cuas serve --transport stdio` subprocesses or by connecting to a
TCP server. Nothing here imports the simulator.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys
from dataclasses import dataclass

import numpy as np


class ServerLost(RuntimeError):
    """The transport dropped; the episode state on the server is gone."""


class ProtocolError(RuntimeError):
    """The server answered with an error frame."""


@dataclass(frozen=True)
class Endpoint:
    """Where to find an environment: a stdio subprocess or a TCP address."""

    kind: str = "stdio"              # "stdio" | "tcp"
    scenario_path: str | None = None  # stdio: --config argument when set
    host: str = "127.0.0.1"
    port: int = 5555


class EnvClient:
    def __init__(self, endpoint: Endpoint):
        self.endpoint = endpoint
        self._proc = None
        self._sock = None
        if endpoint.kind == "stdio":
            cmd = [sys.executable, "-m", "cuas.cli", "serve", "--transport", "stdio"]
            if endpoint.scenario_path:
                cmd += ["--config", endpoint.scenario_path]
            self._proc = subprocess.Popen(cmd, stdin=subprocess.PIPE,
                                          stdout=subprocess.PIPE, text=True)
            self._reader = self._proc.stdout
            self._writer = self._proc.stdin
        elif endpoint.kind == "tcp":
            self._sock = socket.create_connection((endpoint.host, endpoint.port),
                                                  timeout=60.0)
            f = self._sock.makefile("rw")
            self._reader = f
            self._writer = f
        else:
            raise ValueError(f"unknown endpoint kind '{endpoint.kind}'")

    def request(self, **msg) -> dict:
        try:
            self._writer.write(json.dumps(msg) + "\n")
            self._writer.flush()
            line = self._reader.readline()
        except (BrokenPipeError, OSError) as e:
            raise ServerLost(f"environment transport failed: {e}") from e
        if not line:
            raise ServerLost("environment closed the connection")
        response = json.loads(line)
        if "error" in response:
            raise ProtocolError(response["error"])
        return response

    def spec(self) -> dict:
        return self.request(cmd="spec")["spec"]

    def reset(self, seed: int) -> dict:
        return self.request(cmd="reset", seed=int(seed))

    def step(self, action) -> dict:
        return self.request(cmd="step", action=[int(a) for a in action])

    def close(self) -> None:
        try:
            if self._writer and not (self._proc and self._proc.poll() is not None):
                self._writer.write(json.dumps({"cmd": "close"}) + "\n")
                self._writer.flush()
        except (BrokenPipeError, OSError):
            pass
        if self._proc is not None:
            self._proc.terminate()
            self._proc.wait(timeout=10)
        if self._sock is not None:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class VectorEnv:
    """n synchronous environments with auto-reset and episode-return tracking."""

    def __init__(self, endpoint: Endpoint, n_envs: int, seed: int = 0):
        self.clients = [EnvClient(endpoint) for _ in range(n_envs)]
        self.n_envs = n_envs
        self.spec = self.clients[0].spec()
        self.n_effectors, self.n_drones = self.spec["action_dims"]
        self.obs_dim = self.spec["total_length"]
        self._next_seed = seed
        self._running_return = np.zeros(n_envs)
        self.finished_returns: list[float] = []

    def _fresh_seed(self) -> int:
        s = self._next_seed
        self._next_seed += 1
        return s

    def _unpack(self, response: dict):
        obs = np.asarray(response["observation"], dtype=np.float32)
        mask = np.asarray(response["mask"], dtype=bool)
        return obs, mask

    def reset_all(self):
        obs = np.empty((self.n_envs, self.obs_dim), dtype=np.float32)
        mask = np.empty((self.n_envs, self.n_effectors, self.n_drones), dtype=bool)
        for k, client in enumerate(self.clients):
            obs[k], mask[k] = self._unpack(client.reset(self._fresh_seed()))
        self._running_return[:] = 0.0
        return obs, mask

    def step(self, actions):
        """actions (n_envs, M); terminated envs are auto-reset.

        Returns (obs, mask, rewards, dones, infos); obs/mask for a done env
        belong to the fresh episode.
        """
        obs = np.empty((self.n_envs, self.obs_dim), dtype=np.float32)
        mask = np.empty((self.n_envs, self.n_effectors, self.n_drones), dtype=bool)
        rewards = np.zeros(self.n_envs, dtype=np.float32)
        dones = np.zeros(self.n_envs, dtype=bool)
        infos = []
        for k, client in enumerate(self.clients):
            response = client.step(actions[k])
            rewards[k] = response["reward"]
            dones[k] = response["terminated"]
            infos.append(response["info"])
            self._running_return[k] += response["reward"]
            if dones[k]:
                self.finished_returns.append(float(self._running_return[k]))
                self._running_return[k] = 0.0
                obs[k], mask[k] = self._unpack(client.reset(self._fresh_seed()))
            else:
                obs[k], mask[k] = self._unpack(response)
        return obs, mask, rewards, dones, infos

    def drain_finished_returns(self) -> list[float]:
        out = self.finished_returns
        self.finished_returns = []
        return out

    def close(self) -> None:
        for client in self.clients:
            client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
