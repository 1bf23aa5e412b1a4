"""Prompt construction, response parsing, and the interaction transcript.

The language model sees a fixed system prompt (robot persona, item
taxonomy, command format) plus, per query, the running transcript and a
user prompt describing the semantic state: holdings, approach intents,
the previous action's outcome, any physical correction, and the currently
valid actions.  Replies must carry a `# verb ; item &` command; everything
else in the reply is kept as reasoning.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .llm_clients import Message, ModelClient, ModelTimeout, TransportError
from .scene import ActionDictionary, HeldState, SceneObject, SemanticAction, VERBS

NOTHING = "Nothing"

SYSTEM_PROMPT_TEMPLATE = """\
Role: You are a robotic assistant named ChefBot, tasked with aiding a human in the kitchen environment.

Objective: Your mission is to facilitate kitchen tasks effectively, focusing on optimal interaction with items and the environment.

Item Categories:
- Category A (Items with Mount): These are items the robot can pick up, typically containers. (Examples: {category_a})
- Category B (Environment Items): Places where items can be set down when held. (Examples: {category_b})
- Category C (Items without Mount): Food items that can only be manipulated when placed atop a Category A item. (Examples: {category_c})

Abilities:
- Pick: Executable only when the robot is empty-handed and over a Category A item, combining Move and Pick actions.
- Move: Allows navigation over any item.
- Place: Places items in hand at a Category B location. Placement should be generic, not specific.
- Tilt/Untilt: Enables tilting objects held over a Category A item and subsequently reverting them to their original state.

Operation Instructions:
- Feedback Learning: Absorb lessons from human corrections and action feedback to refine actions independently of direct interventions.
- Action Execution: Always begin actions with '#', separate commands and items with ';', and conclude with '&'.
- Response Requirement: Every action response must include a reasoning step, clarifying the robot's decision-making process.

Example Command: # Pick ; {example_item} &

Special Notes:
- One Command at a time.
- Human corrections: Human will directly correct you to the right place. If last time human corrected you on the stove, next time when the same state happens, considering the command "go to the stove".
- Interaction history and feedback on action results are provided. Use this information to improve performance.
- Human Priority: Always prioritize assisting the human collaboratively and efficiently.
"""

FORMAT_REMINDER = (
    "Reminder: reply with exactly one command in the form "
    "# <action> ; <item> & using only the listed available actions."
)

_COMMAND_RE = re.compile(r"#\s*([A-Za-z][A-Za-z-]*)\s*;\s*([^&#]*?)\s*&")


class ParseFailure(ValueError):
    """No well-formed `# verb ; item &` command in the reply."""


class MalformedVerb(ParseFailure):
    """A command was found but its verb is not in the action vocabulary."""


class UnknownItem(ParseFailure):
    """A command was found but its item is not a known scene label."""


def build_system_prompt(objects: list[SceneObject]) -> str:
    def examples(cat: str) -> str:
        labels = [o.label for o in objects if o.category == cat]
        if not labels:
            return "none present"
        return ", ".join(f"'{label}'" for label in labels)

    a_items = [o.label for o in objects if o.category == "A"]
    return SYSTEM_PROMPT_TEMPLATE.format(
        category_a=examples("A"),
        category_b=examples("B"),
        category_c=examples("C"),
        example_item=a_items[0] if a_items else "cooking pot",
    )


def _display(verb: str, label: str) -> str:
    return f"{verb.capitalize()} {label}"


def build_user_prompt(
    objects: list[SceneObject],
    held: HeldState,
    dictionary: ActionDictionary,
    *,
    human_approach: str | None = None,
    planned: SemanticAction | None = None,
    last_action: SemanticAction | None = None,
    last_succeeded: bool | None = None,
    failure_reason: str | None = None,
    correction: SemanticAction | None = None,
) -> str:
    """Semantic scene description, one state item per line.

    Raises if the dictionary is empty: `move` is valid over any object, so
    an empty dictionary means the scene itself is broken.
    """
    if len(dictionary) == 0:
        raise ValueError("empty action dictionary: scene has no objects")
    labels = {o.id: o.label for o in objects}

    def label_of(object_id: str | None) -> str:
        if object_id is None:
            return NOTHING
        return labels.get(object_id, object_id)

    lines = []
    if correction is not None:
        corr_label = label_of(correction.object_id)
        lines.append(
            "In the previous step, the human corrected the robot's action "
            f"by pushing it to: '{corr_label}'. The final action executed by the robot was: "
            f"{correction.verb.capitalize()} '{corr_label}'."
        )
    else:
        lines.append("In the previous step, the human did not correct the robot's action.")
        if last_action is not None and last_succeeded is not None:
            shown = _display(last_action.verb, label_of(last_action.object_id))
            if last_succeeded:
                lines.append(f'The last action, "{shown}" was executed successfully.')
            else:
                reason = failure_reason or "unknown"
                lines.append(f'The last action, "{shown}" failed: {reason}.')

    lines.append(f'The robot is currently holding "{label_of(held.robot_holding)}"')
    lines.append(f'The human is holding "{label_of(held.human_holding)}."')
    lines.append(f'The robot is approaching "{label_of(planned.object_id if planned else None)}."')
    lines.append(f'The human is approaching "{label_of(human_approach)}"')
    available = ", ".join(
        f'{e.semantic.verb} "{e.label}"' for e in dictionary.entries
    )
    lines.append(f"The available actions are: {available}.")
    return "\n".join(lines)


def parse_response(raw: str, labels: dict[str, str]) -> tuple[str, str, str]:
    """Extract (verb, object_id, reasoning) from a model reply.

    The first `# verb ; item &` substring is taken as the command; the
    verb is matched case-insensitively against the vocabulary and the item
    against scene labels (quotes stripped).  The rest of the reply is the
    reasoning.
    """
    match = _COMMAND_RE.search(raw)
    if match is None:
        raise ParseFailure("no `# verb ; item &` command found")
    verb = match.group(1).strip().lower()
    if verb not in VERBS:
        raise MalformedVerb(f"unknown verb {match.group(1)!r}")
    item = match.group(2).strip().strip("'\"").strip()
    by_label = {label.lower(): obj_id for obj_id, label in labels.items()}
    by_id = {obj_id.lower(): obj_id for obj_id in labels}
    object_id = by_label.get(item.lower()) or by_id.get(item.lower())
    if object_id is None:
        raise UnknownItem(f"unknown item {item!r}")
    reasoning = (raw[: match.start()] + raw[match.end() :]).strip()
    return verb, object_id, reasoning


@dataclass(frozen=True)
class TranscriptEntry:
    step: int
    user_prompt: str
    raw_response: str
    proposed: SemanticAction | None
    reasoning: str = ""
    execution_result: str = "pending"  # pending | succeeded | failed:<reason>
    correction: SemanticAction | None = None
    correction_text: str | None = None


class Transcript:
    """Append-only interaction history; prompting truncates, never mutates."""

    def __init__(self, prompt_window: int = 20):
        self.entries: list[TranscriptEntry] = []
        self.prompt_window = prompt_window

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, entry: TranscriptEntry) -> None:
        if self.entries and entry.step <= self.entries[-1].step:
            raise ValueError("transcript steps must be strictly increasing")
        self.entries.append(entry)

    def amend_last(self, **changes) -> None:
        if not self.entries:
            raise ValueError("no entry to amend")
        self.entries[-1] = replace(self.entries[-1], **changes)

    def history_messages(self) -> list[Message]:
        recent = self.entries[-self.prompt_window :]
        messages: list[Message] = []
        for entry in recent:
            messages.append({"role": "user", "content": entry.user_prompt})
            messages.append({"role": "assistant", "content": entry.raw_response})
        return messages


def record_correction(transcript: Transcript, corrected: SemanticAction, label: str) -> None:
    """Annotate the latest entry with a concluded physical correction.

    A second correction in the same step wins; the earlier one is kept in
    the correction text for the record.
    """
    if not transcript.entries:
        raise ValueError("cannot record a correction before any interaction")
    text = f"the human corrected the robot's action by pushing it to: '{label}'"
    prev = transcript.entries[-1]
    if prev.correction is not None and prev.correction_text:
        text = prev.correction_text + "; then " + text
    transcript.amend_last(correction=corrected, correction_text=text)


@dataclass
class Decision:
    action: SemanticAction | None
    entry: TranscriptEntry
    retries_used: int = 0


def decide(
    client: ModelClient,
    system_prompt: str,
    user_prompt: str,
    transcript: Transcript,
    labels: dict[str, str],
    step: int,
    retry_budget: int = 2,
) -> Decision:
    """Query the model for the next semantic action and log the exchange.

    Parse failures are retried with a format reminder appended; on budget
    exhaustion (or transport failure) the decision is a hold-in-place,
    recorded as a failed entry, and the simulation carries on.
    """
    messages: list[Message] = [{"role": "system", "content": system_prompt}]
    messages.extend(transcript.history_messages())

    prompt = user_prompt
    retries = 0
    raw = ""
    while True:
        attempt = messages + [{"role": "user", "content": prompt}]
        try:
            raw = client.complete(attempt)
        except (TransportError, ModelTimeout) as exc:
            entry = TranscriptEntry(
                step=step,
                user_prompt=user_prompt,
                raw_response=f"<no response: {type(exc).__name__}>",
                proposed=None,
                execution_result="failed:model_unavailable",
            )
            transcript.append(entry)
            return Decision(None, entry, retries)
        try:
            verb, object_id, reasoning = parse_response(raw, labels)
        except ParseFailure:
            if retries < retry_budget:
                retries += 1
                prompt = user_prompt + "\n" + FORMAT_REMINDER
                continue
            entry = TranscriptEntry(
                step=step,
                user_prompt=user_prompt,
                raw_response=raw,
                proposed=None,
                execution_result="failed:unparseable",
            )
            transcript.append(entry)
            return Decision(None, entry, retries)
        action = SemanticAction(verb, object_id)
        entry = TranscriptEntry(
            step=step,
            user_prompt=user_prompt,
            raw_response=raw,
            proposed=action,
            reasoning=reasoning,
        )
        transcript.append(entry)
        return Decision(action, entry, retries)


@dataclass(frozen=True)
class RecallTrialState:
    """A correctable semantic state plus deterministic filler states."""

    objects: list[SceneObject]
    state_held: HeldState
    state_dictionary: ActionDictionary
    corrected: SemanticAction
    filler_held: HeldState
    filler_dictionary: ActionDictionary
    filler_targets: list[str]  # object ids cycled for "human approaching"


@dataclass(frozen=True)
class RecallResult:
    n: int
    trials: int
    successes: int
    errors: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


def recall_experiment(
    client_factory,
    setup: RecallTrialState,
    n_values: list[int],
    trials: int,
) -> list[RecallResult]:
    """Score whether the model re-proposes a past correction after n steps.

    Per trial: present the correctable state, record a correction, run n
    filler interactions, re-present the same state, and count success when
    the proposal equals the corrected action.  `client_factory` builds a
    fresh client per trial so mock policies cannot leak state.
    """
    labels = {o.id: o.label for o in setup.objects}
    system_prompt = build_system_prompt(setup.objects)
    corr_label = labels[setup.corrected.object_id]
    results = []
    for n in n_values:
        successes = 0
        errors = 0
        for _ in range(trials):
            client = client_factory()
            transcript = Transcript()
            step = 0
            state_prompt = build_user_prompt(
                setup.objects, setup.state_held, setup.state_dictionary
            )
            decision = decide(
                client, system_prompt, state_prompt, transcript, labels, step
            )
            if decision.entry.execution_result.startswith("failed:model"):
                errors += 1
                continue
            record_correction(transcript, setup.corrected, corr_label)

            pending_correction = setup.corrected
            failed = False
            for i in range(n):
                step += 1
                target = setup.filler_targets[i % len(setup.filler_targets)]
                filler_prompt = build_user_prompt(
                    setup.objects,
                    setup.filler_held,
                    setup.filler_dictionary,
                    human_approach=target,
                    correction=pending_correction,
                )
                pending_correction = None
                decision = decide(
                    client, system_prompt, filler_prompt, transcript, labels, step
                )
                if decision.entry.execution_result.startswith("failed:model"):
                    failed = True
                    break
            if failed:
                errors += 1
                continue

            step += 1
            probe_prompt = build_user_prompt(
                setup.objects,
                setup.state_held,
                setup.state_dictionary,
                correction=pending_correction,
            )
            decision = decide(
                client, system_prompt, probe_prompt, transcript, labels, step
            )
            if decision.entry.execution_result.startswith("failed:model"):
                errors += 1
                continue
            if decision.action == setup.corrected:
                successes += 1
        results.append(RecallResult(n=n, trials=trials, successes=successes, errors=errors))
    return results
