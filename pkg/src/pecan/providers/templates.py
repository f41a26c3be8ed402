"""Versioned prompt templates, addressed by template id.

Templates are plain strings with ``{name}`` slots filled by literal
replacement (not ``str.format``), so braces in the template body survive
rendering. Treat the text as frozen assets: changing a template means
minting a new id.
"""

from __future__ import annotations

SUMMARIZE_V1 = "summarize/v1"
DECIDE_V1 = "decide/v1"
ANSWER_V1 = "answer/v1"

_TEMPLATES: dict[str, str] = {
    SUMMARIZE_V1: (
        "Summary the following information. Each segment is separated by a new line symbol.\n"
        "\n"
        "{segments}\n"
        "\n"
        "Split your summary into different summary points according to the semantic information"
        " in these information points. It is not necessary to generate each summary point for"
        " each information point. Gather and organize information into summary points. In each"
        " summary point, try to avoid using pronouns like he/she/they and instead use full"
        " names. Generate in the format of:\n"
        "\n"
        "* {summary point}\n"
        "* {summary point}\n"
        "* {summary point}\n"
        "......\n"
        "\n"
        "Do not provide any explanation and start the summary directly."
    ),
    DECIDE_V1: (
        "Can this question be answered by the following information?"
        ' Response "Yes" or "No" in one word. Do not provide any explanation.\n'
        "\n"
        "Question:\n"
        "{question}\n"
        "\n"
        "Information:\n"
    ),
    ANSWER_V1: (
        "Given the above information and question, answer the question as concisely as you can."
    ),
}


class UnknownTemplate(KeyError):
    pass


def get_template(template_id: str) -> str:
    try:
        return _TEMPLATES[template_id]
    except KeyError:
        raise UnknownTemplate(f"unknown template_id: {template_id!r}") from None


def render(template_id: str, **slots: str) -> str:
    """Fill named slots by literal substitution."""
    text = get_template(template_id)
    for name, value in slots.items():
        text = text.replace("{" + name + "}", value)
    return text


def render_summarize(node_texts: list[str], template_id: str = SUMMARIZE_V1) -> str:
    """The graph-construction prompt: batch node texts, newline-separated, in order."""
    return render(template_id, segments="\n".join(node_texts))


def render_decide_prefix(question: str, template_id: str = DECIDE_V1) -> str:
    """First-turn prompt up to and including the information header.

    Visited node texts are appended below this prefix, one per line, as the
    session grows.
    """
    return render(template_id, question=question)
