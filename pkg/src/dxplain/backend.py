"""Reference oracle backend.

Serves the line protocol over stdin/stdout around the exhaustive
oracle: one JSON document per line, check queries answered by id and
possibly out of order, cancel honored mid-search.  Start it with a
model document; each check carries its own instance and label.

    dxplain-backend model.json [--latency SECONDS]

--latency inserts a cancellable sleep before each search, which makes
the backend act like a slow verifier (useful for exercising client
side cancellation).
"""

import argparse
import json
import sys
import threading

from .core import (CancelToken, ExplanationProblem, FeatureSet, Instance, Norm,
                   OracleQuery)
from .models import load_model
from .oracles import ExhaustiveOracle


class Backend:
    def __init__(self, model, space, latency=0.0, out=None):
        self.model = model
        self.space = space
        self.latency = latency
        self.out = out if out is not None else sys.stdout
        self._write_lock = threading.Lock()
        self._pending = {}
        self._pending_lock = threading.Lock()
        self._threads = []

    def _reply(self, msg):
        with self._write_lock:
            self.out.write(json.dumps(msg) + "\n")
            self.out.flush()

    def _handle_check(self, msg):
        qid = msg.get("id")
        token = CancelToken()
        with self._pending_lock:
            self._pending[qid] = token
        try:
            instance = Instance(msg["instance"], msg["label"])
            problem = ExplanationProblem(self.model, self.space, instance)
            norm = Norm.parse(msg["norm"])
            query = OracleQuery(epsilon=msg["epsilon"], norm=norm,
                                fixed=FeatureSet(msg["fixed"]), cancel=token)
            if self.latency > 0 and token.wait(self.latency):
                self._reply({"cmd": "answer", "id": qid, "found": None})
                return
            answer = ExhaustiveOracle(problem).find_adv_ex(query)
            self._reply({
                "cmd": "answer",
                "id": qid,
                "found": answer.found,
                "witness": None if answer.witness is None else list(answer.witness),
            })
        except Exception as exc:
            self._reply({"cmd": "answer", "id": qid, "found": None, "error": str(exc)})
        finally:
            with self._pending_lock:
                self._pending.pop(qid, None)

    def serve(self, lines):
        for line in lines:
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
            except json.JSONDecodeError:
                print("backend: ignoring malformed line", file=sys.stderr)
                continue
            cmd = msg.get("cmd")
            if cmd == "hello":
                self._reply({"cmd": "hello", "features": self.space.m,
                             "classes": self.model.num_classes})
            elif cmd == "check":
                worker = threading.Thread(target=self._handle_check, args=(msg,))
                worker.start()
                self._threads.append(worker)
            elif cmd == "cancel":
                with self._pending_lock:
                    token = self._pending.get(msg.get("id"))
                if token is not None:
                    token.cancel()
            elif cmd == "quit":
                break
            # anything else is ignored for forward compatibility
        for worker in self._threads:
            worker.join()


def console(argv=None):
    parser = argparse.ArgumentParser(
        prog="dxplain-backend",
        description="exhaustive adversarial-example backend over stdio")
    parser.add_argument("model", help="model document to serve")
    parser.add_argument("--latency", type=float, default=0.0,
                        help="cancellable sleep before each search, in seconds")
    args = parser.parse_args(argv)
    model, space = load_model(args.model)
    Backend(model, space, latency=args.latency).serve(sys.stdin)
    return 0


if __name__ == "__main__":
    sys.exit(console())
