"""Chat access to the two models behind one small interface.

The synthesis engine talks to a Synthesizer model and a Formalizer
model.  Both are reached through a ChatSession bound to a Backend:
HttpBackend for a live chat-completions provider, ReplayBackend for
deterministic offline runs driven by a recorded transcript, and
RecordingBackend to capture a live run into such a transcript.

Replay matches requests by a digest of (role, prompt text), not by
position, so any drift between the fixture and the current prompt
templates is detected rather than silently absorbed.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from .prompts import PromptBundle

TRANSCRIPT_FORMAT = "chat-transcript"
TRANSCRIPT_VERSION = 1


class GatewayError(Exception):
    """Base for everything raised out of this module."""


class ReplayMissError(GatewayError):
    """A prompt was not found in the replay transcript."""

    def __init__(self, role: str, digest: str):
        super().__init__(
            f"replay transcript has no entry for digest {digest} ({role} prompt); "
            "the fixtures and the current prompts have drifted apart")
        self.role = role
        self.digest = digest


class TranscriptError(GatewayError):
    """Malformed or mismatched transcript file."""


@dataclass(frozen=True)
class TokenCount:
    input: int = 0
    output: int = 0

    def __add__(self, other: "TokenCount") -> "TokenCount":
        return TokenCount(self.input + other.input, self.output + other.output)

    @property
    def total(self) -> int:
        return self.input + self.output


@dataclass(frozen=True)
class TranscriptEntry:
    digest: str
    response: str
    tokens: TokenCount


@dataclass(frozen=True)
class Transcript:
    entries: tuple[TranscriptEntry, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for e in self.entries:
            if e.digest in seen:
                raise TranscriptError(f"duplicate digest in transcript: {e.digest}")
            seen.add(e.digest)

    def lookup(self, digest: str) -> TranscriptEntry | None:
        for e in self.entries:
            if e.digest == digest:
                return e
        return None


def request_digest(role: str, prompt: str) -> str:
    return hashlib.sha256((role + "\n" + prompt).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Message:
    speaker: str  # "user" | "assistant"
    text: str


@dataclass(frozen=True)
class Exchange:
    digest: str
    prompt: str
    response: str
    tokens: TokenCount


class Backend(Protocol):
    def complete(self, role: str, prompt: str,
                 history: tuple[Message, ...]) -> tuple[str, TokenCount]:
        """Return the assistant reply and its token usage."""
        ...


SYNTHESIZER = "Synthesizer"
FORMALIZER = "Formalizer"


@dataclass
class ChatSession:
    """One conversation with one model role; history accumulates."""

    role: str
    backend: Backend
    messages: list[Message] = field(default_factory=list)
    token_count: TokenCount = TokenCount()
    exchanges: list[Exchange] = field(default_factory=list)

    def send(self, prompt: str | PromptBundle) -> str:
        text = prompt.text if isinstance(prompt, PromptBundle) else prompt
        if not text.strip():
            raise GatewayError("refusing to send an empty prompt")
        history = tuple(self.messages)
        reply, tokens = self.backend.complete(self.role, text, history)
        self.messages.append(Message("user", text))
        self.messages.append(Message("assistant", reply))
        self.token_count = self.token_count + tokens
        self.exchanges.append(
            Exchange(request_digest(self.role, text), text, reply, tokens))
        return reply


def send(session: ChatSession, prompt: str | PromptBundle) -> str:
    return session.send(prompt)


# --- replay -----------------------------------------------------------

class ReplayBackend:
    """Serve recorded responses; any unrecorded prompt is a hard error."""

    def __init__(self, transcript: Transcript):
        self.transcript = transcript

    def complete(self, role: str, prompt: str,
                 history: tuple[Message, ...]) -> tuple[str, TokenCount]:
        digest = request_digest(role, prompt)
        entry = self.transcript.lookup(digest)
        if entry is None:
            raise ReplayMissError(role, digest)
        return entry.response, entry.tokens


class RecordingBackend:
    """Pass through to an inner backend and remember every exchange."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self._entries: list[TranscriptEntry] = []

    def complete(self, role: str, prompt: str,
                 history: tuple[Message, ...]) -> tuple[str, TokenCount]:
        reply, tokens = self.inner.complete(role, prompt, history)
        digest = request_digest(role, prompt)
        for e in self._entries:
            if e.digest == digest:
                if e.response != reply:
                    raise TranscriptError(
                        f"two different responses recorded for digest {digest}")
                return reply, tokens
        self._entries.append(TranscriptEntry(digest, reply, tokens))
        return reply, tokens

    def transcript(self) -> Transcript:
        return Transcript(tuple(self._entries))


def record(session: ChatSession) -> Transcript:
    """Transcript of one session's exchanges, in order."""
    seen: dict[str, TranscriptEntry] = {}
    for ex in session.exchanges:
        prev = seen.get(ex.digest)
        entry = TranscriptEntry(ex.digest, ex.response, ex.tokens)
        if prev is not None and prev.response != entry.response:
            raise TranscriptError(f"two different responses for digest {ex.digest}")
        seen.setdefault(ex.digest, entry)
    return Transcript(tuple(seen.values()))


def save_transcript(transcript: Transcript, path: str | Path) -> None:
    lines = [json.dumps({"format": TRANSCRIPT_FORMAT, "version": TRANSCRIPT_VERSION})]
    for e in transcript.entries:
        lines.append(json.dumps({
            "digest": e.digest,
            "response": e.response,
            "tokens_in": e.tokens.input,
            "tokens_out": e.tokens.output,
        }, ensure_ascii=False))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_transcript(path: str | Path) -> Transcript:
    raw = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in raw.splitlines() if ln.strip()]
    if not lines:
        raise TranscriptError(f"{path}: empty transcript file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as err:
        raise TranscriptError(f"{path}: bad header line: {err}") from err
    if not isinstance(header, dict) or header.get("format") != TRANSCRIPT_FORMAT:
        raise TranscriptError(f"{path}: not a {TRANSCRIPT_FORMAT} file")
    if header.get("version") != TRANSCRIPT_VERSION:
        raise TranscriptError(
            f"{path}: transcript version {header.get('version')!r} is not supported "
            f"(expected {TRANSCRIPT_VERSION})")
    entries = []
    for n, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
            entries.append(TranscriptEntry(
                digest=obj["digest"],
                response=obj["response"],
                tokens=TokenCount(int(obj["tokens_in"]), int(obj["tokens_out"])),
            ))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
            raise TranscriptError(f"{path}:{n}: bad transcript entry: {err}") from err
    return Transcript(tuple(entries))


def merge_transcripts(parts: list[Transcript]) -> Transcript:
    """Union of several transcripts; conflicting digests are an error."""
    seen: dict[str, TranscriptEntry] = {}
    out: list[TranscriptEntry] = []
    for t in parts:
        for e in t.entries:
            prev = seen.get(e.digest)
            if prev is None:
                seen[e.digest] = e
                out.append(e)
            elif prev.response != e.response:
                raise TranscriptError(f"conflicting responses for digest {e.digest}")
    return Transcript(tuple(out))


# --- live provider ----------------------------------------------------

@dataclass(frozen=True)
class ProviderConfig:
    base_url: str
    model: str
    api_key_env: str = "LOOPINV_API_KEY"
    request_timeout: float = 120.0
    max_tries: int = 3


class HttpBackend:
    """Chat-completions style JSON-over-HTTP provider."""

    def __init__(self, config: ProviderConfig):
        self.config = config

    def _api_key(self) -> str:
        key = os.environ.get(self.config.api_key_env, "")
        if not key:
            raise GatewayError(
                f"no API key: set the {self.config.api_key_env} environment variable")
        return key

    def complete(self, role: str, prompt: str,
                 history: tuple[Message, ...]) -> tuple[str, TokenCount]:
        import requests  # deferred so offline use never needs it

        messages = [{"role": "user" if m.speaker == "user" else "assistant",
                     "content": m.text} for m in history]
        messages.append({"role": "user", "content": prompt})
        payload = {"model": self.config.model, "messages": messages}
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Authorization": f"Bearer {self._api_key()}",
                   "Content-Type": "application/json"}

        last_err: Exception | None = None
        for attempt in range(self.config.max_tries):
            if attempt:
                time.sleep(min(2.0 ** attempt, 8.0))
            try:
                resp = requests.post(url, json=payload, headers=headers,
                                     timeout=self.config.request_timeout)
                if resp.status_code >= 500 or resp.status_code == 429:
                    last_err = GatewayError(f"provider returned HTTP {resp.status_code}")
                    continue
                resp.raise_for_status()
                body = resp.json()
                text = body["choices"][0]["message"]["content"]
                usage = body.get("usage") or {}
                # some providers omit usage; a 4-chars-per-token estimate
                # keeps budget accounting monotone rather than exact
                tokens = TokenCount(
                    int(usage.get("prompt_tokens", sum(len(m["content"]) for m in messages) // 4)),
                    int(usage.get("completion_tokens", len(text) // 4)),
                )
                return text, tokens
            except requests.RequestException as err:
                last_err = err
                continue
            except (KeyError, IndexError, TypeError, ValueError) as err:
                raise GatewayError(f"malformed provider response: {err}") from err
        raise GatewayError(f"provider unreachable after {self.config.max_tries} tries: {last_err}")
