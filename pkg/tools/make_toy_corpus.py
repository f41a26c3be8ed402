"""Regenerate the bundled toy corpus and query set.

Five documents of exactly 2000 tokens each, built from 20 paragraphs of
exactly 100 tokens. With the toy build settings (chunk_size_tokens=100)
every chunk is one paragraph, so the mock provider's summary of a chunk is
that paragraph's lead sentence and the query set below can key facts to
specific paragraphs deterministically.

Usage: python tools/make_toy_corpus.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

SRC = Path(__file__).resolve().parent.parent / "src"
sys.path.insert(0, str(SRC))

from pecan.tokenizers import get_tokenizer, WHITESPACE_PUNCT_ID  # noqa: E402

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "pecan" / "data" / "toy"
PARAGRAPH_TOKENS = 100
PARAGRAPHS_PER_DOC = 20

FILLERS = [
    "The remaining entries describe routine maintenance and quiet afternoons.",
    "Visitors left short remarks in the margin of the ledger.",
    "Nothing unusual interrupted the schedule for several days afterward.",
    "Supplies were counted twice and the totals matched the manifest.",
    "A short meeting reviewed the plans for the coming season.",
    "The caretaker noted the readings in the evening logbook.",
    "Weather stayed mild and the work continued without delay.",
    "Several small repairs were postponed until the next inspection.",
    "The committee filed its minutes with the district office.",
    "An old photograph of the site hangs near the entrance.",
]

# doc_id -> list of (lead sentence, optional (query id, query, answers))
DOCS: dict[str, list[tuple[str, tuple | None]]] = {
    "harbor": [
        ("The lighthouse keeper Mira Voss repainted the north tower in April.",
         ("q-harbor-tower", "Who repainted the north tower of the lighthouse?",
          ["Mira Voss", "the lighthouse keeper Mira Voss"])),
        ("Fishing crews landed a record haul of silver herring on Tuesday.", None),
        ("The harbor master closed the east pier after a spring storm.",
         ("q-harbor-pier", "Why was the east pier closed by the harbor master?",
          ["after a spring storm", "a spring storm"])),
        ("A new ferry route to Gull Island opened at the end of May.", None),
        ("Shipwrights replaced the keel of the schooner Aurora in June.", None),
        ("The chandlery began stocking rope imported from Brindle Bay.", None),
        ("Two apprentice pilots passed their navigation examination.", None),
        ("The fish market moved its morning auction to the stone quay.", None),
        ("Divers cleared the channel buoys of tangled netting.", None),
        ("A bronze bell recovered from the wreck was hung in the chapel.", None),
        ("The customs office hired a clerk named Odell Merrin.", None),
        ("Gale warnings kept the fleet in port for three days.", None),
        ("The cooperative voted to repair the breakwater with granite blocks.", None),
        ("An albatross nested on the roof of the signal station.", None),
        ("The dredging barge deepened the inner basin by two meters.", None),
        ("Lantern oil deliveries switched to the first Monday of each month.", None),
        ("The sailmaker stitched a storm jib for the pilot cutter.", None),
        ("Charts of the southern shoals were redrawn after the survey.", None),
        ("The harbor festival ended with a procession of lit dinghies.", None),
        ("Winter moorings were assigned by lottery at the town hall.", None),
    ],
    "observatory": [
        ("Astronomer Pell Arden calibrated the meridian telescope in March.",
         ("q-observatory-calibrated", "Who calibrated the meridian telescope?",
          ["Pell Arden", "astronomer Pell Arden"])),
        ("The night assistants logged a bright meteor over the western ridge.", None),
        ("A cracked counterweight halted the equatorial mount for a week.", None),
        ("The dome shutters received new copper runners in the summer.", None),
        ("Observations of the double star Miraxis filled forty plates.",
         ("q-observatory-plates", "How many plates did the observations of Miraxis fill?",
          ["forty plates", "forty"])),
        ("A visiting scholar lectured on the drift of the polar axis.", None),
        ("The clock room gained a second pendulum regulator.", None),
        ("Fog spoiled every exposure taken during the first week of autumn.", None),
        ("The spectrograph revealed strong sodium lines in the comet's tail.", None),
        ("A new ledger recorded the nightly seeing conditions.", None),
        ("The director approved funds for a photographic refractor.", None),
        ("Mice chewed the insulation of the chronograph wires.", None),
        ("Students measured the parallax of a nearby red dwarf.", None),
        ("The west pier of the transit instrument was releveled.", None),
        ("An aurora interrupted the magnetometer readings in October.", None),
        ("The librarian catalogued charts donated by a retired captain.", None),
        ("Frost forced the staff to fit heaters beside the mirror cell.", None),
        ("A schoolhouse group toured the dome on the equinox.", None),
        ("The annual report praised the precision of the time service.", None),
        ("Snow sealed the mountain road until the plough arrived.", None),
    ],
    "orchard": [
        ("The cooperative planted two hundred dwarf apple trees along the south slope.",
         ("q-orchard-trees", "How many dwarf apple trees did the cooperative plant?",
          ["two hundred", "two hundred dwarf apple trees"])),
        ("Frost fans protected the early blossoms through a cold April night.", None),
        ("Beekeeper Sana Oduya moved twelve hives into the pear rows.",
         ("q-orchard-hives", "Who moved the hives into the pear rows?",
          ["Sana Oduya", "beekeeper Sana Oduya"])),
        ("The press house bottled the first run of cloudy cider in September.", None),
        ("Grafting workshops drew growers from three neighboring valleys.", None),
        ("A leaf blight on the quince hedge was treated with copper spray.", None),
        ("The packing shed installed a roller table and a second scale.", None),
        ("Harvest crews filled ninety crates of russet apples by noon.", None),
        ("The irrigation channel was lined with clay tiles before summer.", None),
        ("A market stall in town sold out of damson preserves each week.", None),
        ("The agronomist recommended mulching the young plum trees.", None),
        ("Windfall fruit went to the cider press or the village pigs.", None),
        ("New trellis wire arrived for the espaliered pears.", None),
        ("The ledger showed a modest surplus after the autumn sales.", None),
        ("Pruning began in the oldest block on the first dry day.", None),
        ("A nursery bed of rootstocks wintered under straw.", None),
        ("The cooperative voted to host a blossom walk in spring.", None),
        ("Starlings stripped one row before the netting went up.", None),
        ("A borrowed tractor hauled crates to the railway siding.", None),
        ("The annual meeting thanked the volunteers with a supper.", None),
    ],
    "railway": [
        ("Curator Ivo Stamm restored the brass nameplate of the engine Meteor.",
         ("q-railway-nameplate", "Who restored the brass nameplate of the engine Meteor?",
          ["Ivo Stamm", "curator Ivo Stamm"])),
        ("The museum acquired a wooden third-class carriage from the branch line.", None),
        ("Volunteers relaid forty meters of narrow-gauge track by the shed.", None),
        ("The signal box demonstration runs every Saturday morning.",
         ("q-railway-signal", "When does the signal box demonstration run?",
          ["every Saturday morning", "Saturday morning"])),
        ("A retired driver donated his collection of timetable posters.", None),
        ("The boiler of the tank engine passed its hydraulic test.", None),
        ("Schoolchildren rode the demonstration line during the fete.", None),
        ("The archive digitized the wage books of the old works.", None),
        ("A replica water crane was cast at the local foundry.", None),
        ("The gift shop sold enamel badges of the Meteor.", None),
        ("Lamplighters recreated the evening shift for a film crew.", None),
        ("The turntable pit was drained and repainted in oxide red.", None),
        ("A lecture traced the line's role in the fruit trade.", None),
        ("The crossing gates were rehung on forged hinges.", None),
        ("Members polished the connecting rods before the open day.", None),
        ("The station clock was sent away for a new escapement.", None),
        ("A mural of the viaduct was unveiled on the platform.", None),
        ("The society printed a guide to the locomotive shed.", None),
        ("Winter work parties sorted a wagonload of chairs and spikes.", None),
        ("The year closed with a lantern tour of the yard.", None),
    ],
    "weather": [
        ("Observer Lena Quist recorded a barometric low of 948 hectopascals in January.",
         ("q-weather-low", "What barometric low did observer Lena Quist record?",
          ["948 hectopascals", "a barometric low of 948 hectopascals"])),
        ("The anemometer mast was guyed with fresh steel cable.", None),
        ("Drifting sand buried the southern rain gauge twice in one month.", None),
        ("The station cat kept gulls away from the instrument screen.", None),
        ("A supply boat landed coal and paraffin at the spring tide.",
         ("q-weather-supply", "What did the supply boat land at the spring tide?",
          ["coal and paraffin", "coal and paraffin at the spring tide"])),
        ("Fog signals sounded for thirty hours during the May haar.", None),
        ("The radio mast carried the morning synoptic report to the mainland.", None),
        ("Thermometer screens were repainted white before the inspection.", None),
        ("A waterspout passed east of the skerries in August.", None),
        ("The logbook noted a halo around the midsummer moon.", None),
        ("Repairs to the jetty steps waited for a calm neap tide.", None),
        ("The observer traded readings with a passing survey ship.", None),
        ("Hailstones the size of peas whitened the helipad in spring.", None),
        ("The generator shed gained a new lightning conductor.", None),
        ("Migrating terns rested on the flag court for a week.", None),
        ("The barograph drum received its winter supply of charts.", None),
        ("A relief observer arrived on the October rotation.", None),
        ("Sea spray glazed the windows during the equinox gale.", None),
        ("The annual audit found every register complete.", None),
        ("New Year brought clear skies and a hard frost.", None),
    ],
}


def pad_to(tokens_needed: int) -> str:
    if tokens_needed <= 0:
        return ""
    if tokens_needed == 1:
        return "Onward"
    if tokens_needed == 2:
        return "Days pass"
    return "Records " + "then " * (tokens_needed - 3) + "follow."


def build_paragraph(lead: str, index: int, tokenizer) -> str:
    parts = [lead]
    for k in range(3):
        parts.append(FILLERS[(index * 3 + k) % len(FILLERS)])
    body = " ".join(parts)
    deficit = PARAGRAPH_TOKENS - tokenizer.count(body)
    if deficit < 0:
        raise ValueError(f"paragraph {index} overflows by {-deficit} tokens: {lead!r}")
    pad = pad_to(deficit)
    return body + (" " + pad if pad else "")


def main() -> None:
    tokenizer = get_tokenizer(WHITESPACE_PUNCT_ID)
    OUT_DIR.mkdir(parents=True, exist_ok=True)

    corpus_path = OUT_DIR / "corpus.jsonl"
    queries_path = OUT_DIR / "queries.jsonl"
    queries = []

    with corpus_path.open("w", encoding="utf-8") as fh:
        for doc_id, paragraphs in DOCS.items():
            if len(paragraphs) != PARAGRAPHS_PER_DOC:
                raise ValueError(f"{doc_id}: expected {PARAGRAPHS_PER_DOC} paragraphs")
            rendered = [
                build_paragraph(lead, i, tokenizer)
                for i, (lead, _) in enumerate(paragraphs)
            ]
            text = "\n\n".join(rendered)
            total = tokenizer.count(text)
            expected = PARAGRAPH_TOKENS * PARAGRAPHS_PER_DOC
            if total != expected:
                raise ValueError(f"{doc_id}: {total} tokens, expected {expected}")
            fh.write(json.dumps({"doc_id": doc_id, "text": text}, ensure_ascii=False) + "\n")
            for _, q in paragraphs:
                if q is not None:
                    qid, query, answers = q
                    queries.append(
                        {"id": qid, "doc_id": doc_id, "query": query, "answers": answers}
                    )

    with queries_path.open("w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(json.dumps(q, ensure_ascii=False) + "\n")

    print(f"wrote {corpus_path} and {queries_path} ({len(queries)} queries)")


if __name__ == "__main__":
    main()
