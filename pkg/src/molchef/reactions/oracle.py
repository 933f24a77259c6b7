"""Line-protocol channel to an external reaction predictor.

Request: dot-joined canonical reactant SMILES plus newline. Response: dot-joined
product SMILES, or ``ERROR <message>``. A reference server is
available (``--echo`` returns the request, otherwise the template
engine answers) via ``python -m molchef.reactions``.
"""

from __future__ import annotations

import argparse
import subprocess
import sys
from typing import Sequence

from ..chem.graph import MolecularGraph, check_valence
from ..chem.smiles import parse_smiles, write_smiles
from .templates import ProductBag, predict_products


class OracleUnavailable(RuntimeError):
    pass


class OracleReturnedUnparseable(ValueError):
    pass


def parse_response(line: str) -> ProductBag:
    """Product bag from one response line; bad SMILES give an invalid record."""
    text = line.strip()
    if text.startswith("ERROR"):
        return ProductBag((), invalid=True, error=text[5:].strip() or "oracle error")
    try:
        if not text:
            raise OracleReturnedUnparseable("empty response")
        products = []
        for part in text.split("."):
            g = parse_smiles(part)
            check_valence(g)
            products.append(write_smiles(g))
    except ValueError as exc:
        return ProductBag((), invalid=True, error=f"unparseable oracle output {text!r}: {exc}")
    return ProductBag(tuple(sorted(products)))


class ExternalOracle:
    """One-request-one-response client over a subprocess's stdin/stdout.

    Not safe for concurrent callers: hold the instance exclusively per round trip.
    """

    def __init__(self, command: Sequence[str]):
        self.command = list(command)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                              text=True, encoding="utf-8", bufsize=1)
            except OSError as exc:
                raise OracleUnavailable(f"cannot start oracle {self.command!r}: {exc}") from None
        return self._proc

    def request(self, line: str) -> str:
        proc = self._ensure()
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            reply = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise OracleUnavailable(f"oracle channel failed: {exc}") from None
        if not reply:
            raise OracleUnavailable("oracle closed the channel")
        return reply.rstrip("\n")

    def __call__(self, bag: Sequence[MolecularGraph]) -> ProductBag:
        request = ".".join(sorted(write_smiles(g) for g in bag))
        return parse_response(self.request(request))

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=10)
            self._proc = None

    def __enter__(self) -> "ExternalOracle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def serve(echo: bool = False, stdin=None, stdout=None) -> None:
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    for line in stdin:
        text = line.strip()
        if echo:
            reply = text
        else:
            try:
                result = predict_products([parse_smiles(s) for s in text.split(".")])
                reply = ".".join(result.products)
            except ValueError as exc:
                reply = f"ERROR {exc}"
        stdout.write(reply + "\n")
        stdout.flush()


def main(argv: Sequence[str] | None = None) -> None:
    parser = argparse.ArgumentParser(description="reference reaction oracle server")
    parser.add_argument("--echo", action="store_true", help="reply with the request unchanged")
    serve(parser.parse_args(argv).echo)
