"""Expert gateway: answers target-pose requests at bifurcations.

Oracle mode computes the geometric pose directly. Human mode publishes the
event (with the rendered frame) to a connected UI client over a local
WebSocket, waits up to the deadline, validates the reply, and falls back
to the oracle on timeout, absence, or repeated invalid poses.

Wire protocol, line-delimited JSON text messages:
  server -> client  {type: "bifurcation", episode, frame_png_base64,
                     bifurcation_id, daughters: [{id, tangent_deg,
                     centerline_px}], deadline_ms, d_max_px}
  client -> server  {type: "pose", bifurcation_id, P_target: [x, y],
                     D_target, branch_id}
  server -> client  {type: "ack", accepted, reason?}
  both directions   {type: "heartbeat"} every 5 s
"""

import base64
import io
import json
import math
import socket
import threading
import time

import numpy as np

from . import expert, geometry, wsio

HEARTBEAT_PERIOD_S = 5.0


class ExpertGateway:
    def __init__(self, vmap, route, catheter_config, mode="oracle",
                 port=0, timeout_ms=10000, advance_mm=expert.DEFAULT_ADVANCE_MM):
        if mode not in ("oracle", "human"):
            raise ValueError(f"unknown gateway mode {mode!r}")
        self.vmap = vmap
        self.route = route
        self.catheter = catheter_config
        self.mode = mode
        self.timeout_ms = timeout_ms
        self.advance_mm = advance_mm

        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._clients = []          # sockets, first one is the controller
        self._pending = None        # dict for the in-flight request
        self._running = False
        self._server = None
        self.port = None
        self._threads = []
        if mode == "human":
            self._start_server(port)

    # -- server plumbing -------------------------------------------------------

    def _start_server(self, port):
        self._server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._server.bind(("127.0.0.1", port))
        self._server.listen(4)
        self.port = self._server.getsockname()[1]
        self._running = True
        t = threading.Thread(target=self._accept_loop, daemon=True)
        t.start()
        hb = threading.Thread(target=self._heartbeat_loop, daemon=True)
        hb.start()
        self._threads = [t, hb]

    def _accept_loop(self):
        while self._running:
            try:
                conn, _ = self._server.accept()
            except OSError:
                return
            try:
                wsio.accept_handshake(conn)
            except wsio.WsError:
                conn.close()
                continue
            with self._lock:
                self._clients.append(conn)
            reader = threading.Thread(target=self._reader_loop, args=(conn,),
                                      daemon=True)
            reader.start()

    def _reader_loop(self, conn):
        try:
            while self._running:
                text = wsio.recv_text(conn)
                if text is None:
                    break
                try:
                    msg = json.loads(text)
                except json.JSONDecodeError:
                    self._send(conn, {"type": "ack", "accepted": False,
                                      "reason": "unparseable message"})
                    continue
                self._handle_message(conn, msg)
        except (wsio.WsError, OSError):
            pass
        finally:
            with self._lock:
                if conn in self._clients:
                    self._clients.remove(conn)
            conn.close()

    def _heartbeat_loop(self):
        while self._running:
            time.sleep(HEARTBEAT_PERIOD_S)
            with self._lock:
                clients = list(self._clients)
            for conn in clients:
                try:
                    wsio.send_text(conn, json.dumps({"type": "heartbeat"}))
                except OSError:
                    pass

    def _send(self, conn, payload):
        try:
            wsio.send_text(conn, json.dumps(payload))
        except OSError:
            pass

    def _handle_message(self, conn, msg):
        kind = msg.get("type")
        if kind == "heartbeat":
            return
        if kind != "pose":
            self._send(conn, {"type": "ack", "accepted": False,
                              "reason": f"unexpected message type {kind!r}"})
            return
        with self._cond:
            pending = self._pending
            if pending is None or msg.get("bifurcation_id") != pending["node"]:
                self._send(conn, {"type": "ack", "accepted": False,
                                  "reason": "no matching pending request"})
                return
            if conn is not self._controller_locked():
                self._send(conn, {"type": "ack", "accepted": False,
                                  "reason": "spectator client"})
                return
            ok, reason, pose = self._validate_pose(msg, pending)
            if ok:
                self._send(conn, {"type": "ack", "accepted": True})
                pending["response"] = pose
                self._cond.notify_all()
            else:
                pending["attempts"] += 1
                self._send(conn, {"type": "ack", "accepted": False,
                                  "reason": reason})
                if pending["attempts"] >= 2:
                    pending["give_up"] = True
                    self._cond.notify_all()

    def _controller_locked(self):
        return self._clients[0] if self._clients else None

    # -- validation -------------------------------------------------------------

    def _validate_pose(self, msg, pending):
        try:
            point = np.array([float(v) for v in msg["P_target"]])
            offset = float(msg["D_target"])
            branch = str(msg["branch_id"])
        except (KeyError, TypeError, ValueError):
            return False, "malformed pose fields", None
        if branch not in pending["daughters"]:
            return False, f"branch {branch!r} is not a daughter here", None
        if not (math.isfinite(point[0]) and math.isfinite(point[1])
                and math.isfinite(offset)):
            return False, "non-finite pose", None
        if abs(offset) > self.catheter.d_max_px:
            return False, "target offset beyond the attainable range", None
        edge = self.vmap.edges[branch]
        dist, _, _ = geometry.project_to_polyline(edge.polyline, point)
        if dist > edge.radius_px:
            return False, "target point outside the branch lumen", None
        pose = expert.TargetPose(offset_px=offset, point_px=point,
                                 branch_id=branch, source="human")
        return True, None, pose

    # -- requests -----------------------------------------------------------------

    def oracle_pose(self, node):
        return expert.oracle_target_pose(self.vmap, node, self.route,
                                         self.catheter, self.advance_mm)

    def request_target_pose(self, environment, state, event, episode=0,
                            timeout_ms=None):
        """Target pose for a bifurcation event; always returns within the
        deadline plus oracle time."""
        if self.mode == "oracle":
            return self.oracle_pose(event.node)
        timeout_ms = self.timeout_ms if timeout_ms is None else timeout_ms
        with self._lock:
            has_client = bool(self._clients)
        if not has_client:
            return self.oracle_pose(event.node)

        message = self._event_message(environment, state, event, episode,
                                      timeout_ms)
        deadline = time.monotonic() + timeout_ms / 1000.0
        with self._cond:
            self._pending = {
                "node": event.node,
                "daughters": tuple(event.daughters),
                "response": None,
                "attempts": 0,
                "give_up": False,
            }
            controller = self._controller_locked()
            if controller is not None:
                self._send(controller, message)
            while (self._pending["response"] is None
                   and not self._pending["give_up"]):
                remaining = deadline - time.monotonic()
                if remaining <= 0 or not self._cond.wait(timeout=remaining):
                    break
            response = self._pending["response"]
            self._pending = None
        return response if response is not None else self.oracle_pose(event.node)

    def _event_message(self, environment, state, event, episode, timeout_ms):
        mask = environment.render_mask(state)
        png = _encode_png(mask)
        daughters = []
        for did in event.daughters:
            edge = self.vmap.edges[did]
            poly = (edge.polyline if edge.src == event.node
                    else edge.polyline[::-1])
            tangent = geometry.unit(poly[1] - poly[0])
            daughters.append({
                "id": did,
                "tangent_deg": math.degrees(math.atan2(tangent[1], tangent[0])),
                "centerline_px": [[float(x), float(y)] for x, y in poly],
            })
        return {
            "type": "bifurcation",
            "episode": int(episode),
            "frame_png_base64": base64.b64encode(png).decode("ascii"),
            "bifurcation_id": int(event.node),
            "daughters": daughters,
            "deadline_ms": int(timeout_ms),
            "d_max_px": float(self.catheter.d_max_px),
        }

    def stop(self):
        self._running = False
        if self._server is not None:
            try:
                self._server.close()
            except OSError:
                pass
        with self._lock:
            clients = list(self._clients)
            self._clients.clear()
        for conn in clients:
            try:
                conn.close()
            except OSError:
                pass


def _encode_png(mask):
    from PIL import Image

    img = Image.fromarray((np.asarray(mask, dtype=np.uint8) * 255), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
