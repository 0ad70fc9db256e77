#!/usr/bin/env python3
"""Regenerate everything under fixtures/.

Goldens are computed here with plain arithmetic, independently of the Rust
code, and frozen into the repository.
"""

import json
import math
import random
import uuid
from pathlib import Path

from PIL import Image, ImageDraw

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"
TEMPLATES = ROOT / "crates" / "core" / "templates" / "system"
CAPS = ROOT / "crates" / "core" / "data" / "capabilities.json"


def dump_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, separators=(",", ":")) + "\n")


def dump_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, ensure_ascii=False, indent=2)
        f.write("\n")


# ---------------------------------------------------------------- screens

def rect(d, x, y, w, h, fill, outline=None):
    d.rectangle([x, y, x + w - 1, y + h - 1], fill=fill, outline=outline)


def slider_panel_png():
    img = Image.new("RGB", (1920, 1080), (255, 255, 255))
    d = ImageDraw.Draw(img)
    rect(d, 500, 700, 700, 300, (240, 240, 244), (200, 200, 210))
    d.text((524, 726), "Saturation", fill=(20, 20, 20))
    for i in range(464):
        shade = int(255 * i / 463)
        d.line([(601 + i, 820), (601 + i, 839)], fill=(shade, 90, 255 - shade))
    rect(d, 1100, 720, 80, 32, (40, 90, 200))
    d.text((1120, 730), "Reset", fill=(255, 255, 255))
    for k in range(3):
        rect(d, 700 + 40 * k, 900, 30, 30, (250, 200, 40), (120, 90, 0))
    return img


def settings_form_png():
    img = Image.new("RGB", (1280, 720), (250, 250, 250))
    d = ImageDraw.Draw(img)
    rect(d, 380, 180, 660, 300, (236, 238, 242))
    rect(d, 400, 200, 300, 36, (255, 255, 255), (120, 120, 120))
    d.text((408, 212), "name@example.com", fill=(150, 150, 150))
    rect(d, 400, 260, 100, 36, (30, 140, 70))
    d.text((432, 272), "Save", fill=(255, 255, 255))
    rect(d, 400, 320, 20, 20, (255, 255, 255), (60, 60, 60))
    d.text((430, 324), "Subscribe", fill=(30, 30, 30))
    # Blank label area: a flat block with no glyphs.
    rect(d, 800, 400, 200, 60, (236, 238, 242))
    return img


# ---------------------------------------------------------------- trees

def node(id, bbox, parent=None, **kw):
    n = {"id": id, "bbox": bbox}
    if parent is not None:
        n["parent"] = parent
    n.update(kw)
    return n


SLIDER_CODE = """export function SaturationPanel() {
  const [sat, setSat] = useState(30);
  const [stars, setStars] = useState(0);
  return (
    <Panel>
      <Label>Saturation</Label>
      <Slider min={0} max={100} value={sat} onChange={setSat} />
      <Button onClick={() => setSat(30)}>Reset</Button>
      <Rating max={3} value={stars} onChange={setStars} />
    </Panel>
  );
}"""

SLIDER_TREE = {
    "image": {"width": 1920, "height": 1080, "screenshot": "screens/slider_panel.png"},
    "component": {"name": "SaturationPanel", "code": SLIDER_CODE},
    "nodes": [
        node("root", [500, 700, 700, 300], tag="div"),
        node("label", [520, 720, 120, 24], "root", tag="span", text="Saturation"),
        node("track", [600.5, 820, 464, 20], "root", tag="span", interactive=True),
        node("reset_wrap", [1100, 720, 80, 32], "root", tag="div"),
        node("reset", [1100, 720, 80, 32], "reset_wrap", tag="button", text="Reset", interactive=True),
        node("dot", [650, 760, 3, 3], "root", tag="i"),
        node("tooltip", [900, 760, 120, 30], "root", tag="div", text="30%", visible=False),
        node("rating", [700, 900, 110, 30], "root", tag="div", role="radiogroup"),
        node("star1", [700, 900, 30, 30], "rating", tag="button", interactive=True),
        node("star2", [740, 900, 30, 30], "rating", tag="button", interactive=True),
        node("star3", [780, 900, 30, 30], "rating", tag="button", interactive=True),
    ],
}

FORM_TREE = {
    "image": {"width": 1280, "height": 720, "screenshot": "screens/settings_form.png"},
    "nodes": [
        node("form", [380, 180, 660, 300], tag="form"),
        node("email", [400, 200, 300, 36], "form", tag="input", text="name@example.com", interactive=True),
        node("save", [400, 260, 100, 36], "form", tag="button", text="Save", interactive=True),
        node("subscribe", [400, 320, 20, 20], "form", tag="input", interactive=True),
        node("notes", [800, 400, 200, 60], "form", tag="label", text=""),
    ],
}


def annotation(ui_type, function, actions, visual="", position=""):
    return json.dumps({
        "visual_description": visual or f"A {ui_type}",
        "position_text": position or "inside the settings panel",
        "functionality": function,
        "ui_type": ui_type,
        "possible_actions": actions,
        "visibility_ok": True,
        "atomicity_ok": True,
    })


def unique(desc, code):
    return "```json\n" + json.dumps({
        "thought_process": "single fixed target",
        "action_space_type": "unique",
        "action_desc": desc,
        "action_params": [],
        "action_discrete_values": None,
        "action_continuous_interval": None,
        "action_code": code,
    }) + "\n```"


SATURATION = json.dumps({
    "thought_process": "The slider maps 0-100 linearly onto the track.",
    "action_space_type": "continuous",
    "action_desc": "Set the saturation to <saturation>",
    "action_params": ["saturation"],
    "action_discrete_values": None,
    "action_continuous_interval": {"saturation": [[0.0, 100.0]]},
    "action_code": "def action(saturation):\n    x_0, y_0 = 600.5, 830\n    x_1, y_1 = 1064.5, 830\n"
                   "    x = x_0 + (x_1 - x_0) * (saturation / 100)\n    pyautogui.click(x, y_0)",
})

RATING = json.dumps({
    "thought_process": "Three stars, 40 px apart.",
    "action_space_type": "discrete",
    "action_desc": "Rate the item <stars> stars",
    "action_params": ["stars"],
    "action_discrete_values": {"stars": [1, 2, 3]},
    "action_continuous_interval": None,
    "action_code": "def action(stars):\n    pyautogui.click(675 + 40 * stars, 915)",
})

UNUSABLE = json.dumps({"visibility_ok": True, "atomicity_ok": False})

MOCK = {
    "model": "mock",
    "strict": True,
    "responses": {
        # Fallbacks by tag.
        "element_annotation": UNUSABLE,
        "continuous_detection": "null",
        "instruction_filter": "PASS",
        "visual_filter": "PASS",
        # Component pipeline.
        "action_intents/slider_panel": '```json\n["Adjust the saturation", "Give a star rating"]\n```',
        "action_detail/slider_panel/0": "```json\n" + SATURATION + "\n```",
        "action_detail/slider_panel/1": RATING,
        # Element pipeline.
        "element_annotation/slider_panel/label": annotation("label", "names the saturation setting", []),
        "element_annotation/slider_panel/track": annotation(
            "slider", "sets the saturation", ["Click the middle of the saturation slider"]),
        "element_action/slider_panel/track/0": unique(
            "Click the middle of the saturation slider", "def action():\n    pyautogui.click(832.5, 830)"),
        "continuous_detection/slider_panel/track": SATURATION,
        "element_annotation/slider_panel/reset": annotation(
            "button", "restores the default saturation", ["Click Reset", "Click the button at (1140, 736)"]),
        "element_action/slider_panel/reset/0": unique(
            "Click the Reset button", "def action():\n    pyautogui.click(1140, 736)"),
        "element_action/slider_panel/reset/1": unique(
            "Click the button at (1140, 736)", "def action():\n    pyautogui.click(1140, 736)"),
        "element_annotation/settings_form/email": annotation(
            "text field", "takes the account email", ["Focus the email field"]),
        "element_action/settings_form/email/0": unique(
            "Click into the email address field", "def action():\n    pyautogui.click(550, 218)"),
        "element_annotation/settings_form/save": annotation(
            "button", "saves the settings", ["Click Save"]),
        "element_action/settings_form/save/0": unique(
            "Click the green Save button", "def action():\n    pyautogui.click(450, 278)"),
        "element_annotation/settings_form/subscribe": annotation(
            "checkbox", "opts into the newsletter", ["Tick Subscribe"]),
        "element_action/settings_form/subscribe/0": unique(
            "Tick the checkbox", "def action():\n    pyautogui.click(410, 330)"),
        "instruction_filter/settings_form/subscribe/a0/0": "FAIL: vague - several checkboxes could match",
        "element_annotation/settings_form/notes": annotation(
            "label", "labels the notes area", ["Click the notes label"]),
        "element_action/settings_form/notes/0": unique(
            "Click the notes label", "def action():\n    pyautogui.click(900, 430)"),
        # Malformed model output: skipped and counted.
        "element_annotation/settings_form/form": "Sorry, I cannot describe this element.",
    },
}


# ---------------------------------------------------------------- office

def round_half_up(v):
    return math.floor(v + 0.5)


def resized(n, patch=28):
    return max(1, round(n / patch)) * patch


def system_text(height, width):
    lines = (TEMPLATES / "computer_use.v1.txt").read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    body = "\n".join(l for l in lines if not l.startswith("# template:"))
    return body.replace("{height}", str(height)).replace("{width}", str(width))


def next_move(instruction):
    return ("Please generate the next move according to the UI screenshot and instruction.\n\n"
            f"Instruction: {instruction}")


def to_wire(p, w, h, rw, rh):
    x = p[0] if w == rw else p[0] * rw / w
    y = p[1] if h == rh else p[1] * rh / h
    return [round_half_up(x), round_half_up(y)]


def image_id(prompt_id, path):
    return str(uuid.uuid5(uuid.NAMESPACE_URL, f"{prompt_id}\n{path}"))


def golden_record(task, action, start, end):
    w, h = task["image"]["width"], task["image"]["height"]
    rw, rh = resized(w), resized(h)
    if action == "left_click_drag":
        args = {"action": action, "start_coordinate": to_wire(start, w, h, rw, rh),
                "coordinate": to_wire(end, w, h, rw, rh)}
    else:
        args = {"action": action, "coordinate": to_wire(start, w, h, rw, rh)}
    call = json.dumps({"name": "computer_use", "arguments": args}, ensure_ascii=False)
    return {
        "conversations": [
            {"from": "system", "value": {"text": system_text(rh, rw)}},
            {"from": "user", "value": [
                {"image": task["image"]["path"], "width": w, "height": h, "resized_height": rh, "resized_width": rw},
                {"text": next_move(task["instruction"])},
            ]},
            {"from": "assistant", "value": [{"text": f"<tool_call>\n{call}\n</tool_call>"}]},
        ],
        "image_id": task.get("image_id") or image_id("computer_use.v1", task["image"]["path"]),
        "source": {"sheet": "sheet", "doc_gap": "doc", "doc_select": "doc",
                   "slide_handle": "slide", "slide_drag": "slide"}[task["target"]],
    }


def compress(records):
    groups = {}
    for r in records:
        groups.setdefault((r["image_id"], r["source"]), []).append(r)
    out = []
    for key in sorted(groups):
        g = groups[key]
        if len(g) == 1:
            out.append(g[0])
            continue
        merged = {"conversations": [g[0]["conversations"][0]], "image_id": key[0], "source": key[1]}
        seen = False
        for r in g:
            for t in r["conversations"][1:]:
                if t["from"] == "user":
                    parts = []
                    for p in t["value"]:
                        if "image" in p:
                            if seen:
                                continue
                            seen = True
                        parts.append(p)
                    t = {"from": "user", "value": parts}
                merged["conversations"].append(t)
        out.append(merged)
    return out


SHEET_GRID = {
    "col_edges": [46 + 82 * k for k in range(15)],
    "row_edges": [157 + 20 * k for k in range(29)],
    "col_header_band": [46, 137, 1148, 20],
    "row_header_band": [0, 157, 46, 560],
    "image": {"width": 1280, "height": 720},
}

DOC_TEXT = "Lorem ipsum dolor sit amet. Vestibulum a diam."
DOC_RUNS = [
    {"text": DOC_TEXT[:28], "char_boxes": [[428 + 8 * i, 614, 8, 18] for i in range(28)]},
    {"text": DOC_TEXT[28:], "char_boxes": [[428 + 8 * i, 614, 8, 18] for i in range(28, len(DOC_TEXT))]},
]
SLIDE_SHAPE = {"bbox": [164, 206, 600, 120], "kind": "title", "text": "Quarterly review",
               "thumbnail": [10, 60, 120, 68]}


def col_index(letters):
    n = 0
    for c in letters:
        n = n * 26 + (ord(c) - 64)
    return n - 1


def sheet_point(cell, kind):
    letters = "".join(c for c in cell if c.isalpha())
    row = int(cell[len(letters):]) - 1
    col = col_index(letters)
    ce, re_ = SHEET_GRID["col_edges"], SHEET_GRID["row_edges"]
    l, r, t, b = ce[col], ce[col + 1], re_[row], re_[row + 1]
    return {
        "corner_tl": (l, t),
        "cell_center": ((l + r) / 2, (t + b) / 2),
        "col_header": ((l + r) / 2, 137 + 20 / 2),
    }[kind]


def doc_gap(query, left, right):
    start = DOC_TEXT.index(query)
    for i in range(start, start + len(query) - 1):
        if DOC_TEXT[i] == left and DOC_TEXT[i + 1] == right:
            ax, ay, aw, ah = 428 + 8 * i, 614, 8, 18
            bx = 428 + 8 * (i + 1)
            return ((ax + aw + bx) / 2, ay + ah / 2)
    raise ValueError("pair")


def office():
    sheet_img = {"path": "cell_left_top_corner/images/1280x720_cell_C19.png", "width": 1280, "height": 720}
    budget_img = {"path": "sheets/budget_1280x720.png", "width": 1280, "height": 720}
    slide_img = {"path": "slides_1280*720/slide_15/original.png", "width": 1280, "height": 720}
    doc_img = {"path": "AmHHgw-Nep9dv1S3X9n5gaoKsDxY_1280x720_SPACE_563_5.png", "width": 1280, "height": 720}
    tasks = [
        {"id": "sheet-c19-tl", "image": sheet_img, "image_id": "15987cec-74d4-4624-b539-43a114caac8f",
         "instruction": "Navigate to top left corner of C19", "action": "mouse_move",
         "target": "sheet", "grid": SHEET_GRID, "cell": "C19", "kind": "corner_tl"},
        {"id": "slide-15-tc", "image": slide_img, "image_id": "3f2ebbae-dee3-4fea-bbc0-ab93136bedab",
         "instruction": "Click the top center resize handle of the title box", "action": "left_click",
         "target": "slide_handle", "shape": SLIDE_SHAPE, "handle": "tc"},
        {"id": "doc-space-563", "image": doc_img, "image_id": "3d35b0b2-d541-45ea-be23-b668263b5b69",
         "instruction": "Place the cursor between 't' and 'i' in 'Vestibulum'", "action": "left_click",
         "target": "doc_gap", "runs": DOC_RUNS, "query": ". Vestibulum a ", "left_char": "t", "right_char": "i"},
        {"id": "budget-b3", "image": budget_img, "instruction": "Select cell B3", "action": "left_click",
         "target": "sheet", "grid": SHEET_GRID, "cell": "B3", "kind": "cell_center"},
        {"id": "budget-col-d", "image": budget_img, "instruction": "Select column D", "action": "left_click",
         "target": "sheet", "grid": SHEET_GRID, "cell": "D1", "kind": "col_header"},
        {"id": "doc-select-word", "image": doc_img, "instruction": "Select the word 'Vestibulum'",
         "target": "doc_select", "runs": DOC_RUNS, "query": ". Vestibulum a ", "start": [" ", "V"], "end": ["m", " "]},
        {"id": "slide-15-move", "image": slide_img, "instruction": "Move the title box slightly to the right",
         "target": "slide_drag", "shape": SLIDE_SHAPE},
        {"id": "slide-15-thumb", "image": slide_img, "instruction": "Open the first slide in the thumbnail pane",
         "action": "left_click", "target": "slide_handle", "shape": SLIDE_SHAPE, "handle": "thumbnail_center"},
    ]
    records = []
    for t in tasks:
        if t["target"] == "sheet":
            rec = golden_record(t, t["action"], sheet_point(t["cell"], t["kind"]), None)
        elif t["target"] == "doc_gap":
            rec = golden_record(t, t["action"], doc_gap(t["query"], t["left_char"], t["right_char"]), None)
        elif t["target"] == "doc_select":
            a = doc_gap(t["query"], *t["start"])
            b = doc_gap(t["query"], *t["end"])
            rec = golden_record(t, "left_click_drag", a, b)
        elif t["target"] == "slide_drag":
            x, y, w, h = SLIDE_SHAPE["bbox"]
            c = (x + w / 2, y + h / 2)
            rec = golden_record(t, "left_click_drag", c, (c[0] + 40, c[1]))
        else:
            x, y, w, h = SLIDE_SHAPE["bbox"]
            if t["handle"] == "tc":
                p = (x + w / 2, y)
            else:
                tx, ty, tw, th = SLIDE_SHAPE["thumbnail"]
                p = (tx + tw / 2, ty + th / 2)
            rec = golden_record(t, t["action"], p, None)
        records.append(rec)
    dump_jsonl(FIX / "office" / "tasks.jsonl", tasks)
    dump_jsonl(FIX / "office" / "golden.jsonl", compress(records))


# ---------------------------------------------------------------- eval

def capability_table():
    rows = json.loads(CAPS.read_text())["rows"]
    table = {}
    for r in rows:
        table.setdefault(r["element_type"].strip().lower(), r["capability"])
    return [r["element_type"] for r in rows], table


CAP_ORDER = ["text_matching", "element_recognition", "layout_understanding", "fine_grained_manipulation", "refusal"]


def pct(c, n):
    return c * 100 / n if n else None


def report(samples, verdicts):
    counts = {c: [0, 0] for c in CAP_ORDER}
    out = []
    for s in sorted(samples, key=lambda s: s["id"]):
        kind, ok = verdicts[s["id"]]
        counts[s["_cap"]][0] += 1
        counts[s["_cap"]][1] += ok
        out.append({"id": s["id"], "capability": s["_cap"], "prediction": kind, "correct": ok})
    total = len(out)
    correct = sum(v["correct"] for v in out)
    rn, rc = counts["refusal"]
    return {
        "capabilities": [{"capability": c, "count": counts[c][0], "correct": counts[c][1],
                          "accuracy": pct(counts[c][1], counts[c][0])} for c in CAP_ORDER],
        "total": total,
        "correct": correct,
        "overall": pct(correct, total),
        "overall_excluding_refusal": pct(correct - rc, total - rn),
        "samples": out,
    }


def predict(s, mode):
    """Planted prediction line plus the verdict it must receive."""
    w, h = s["image"]["width"], s["image"]["height"]
    rw, rh = resized(w), resized(h)
    if s["refusal"]:
        if mode % 3 == 2:
            return {"id": s["id"], "raw": f"pyautogui.click({w // 2}, {h // 2})", "frame": "native"}, ("point", False)
        return {"id": s["id"], "raw": "The element is not present on this screen."}, ("refusal", True)
    x, y, bw, bh = s["bbox"]
    cx, cy = x + bw / 2, y + bh / 2
    if mode == 0:
        p = [round(cx * rw / w), round(cy * rh / h)]
        call = json.dumps({"name": "computer_use", "arguments": {"action": "left_click", "coordinate": p}})
        back = (p[0] * w / rw, p[1] * h / rh)
        return {"id": s["id"], "raw": f"<tool_call>\n{call}\n</tool_call>"}, ("point", inside(s, back))
    if mode == 1:
        px = x - 5 if x >= 5 else x + bw + 5
        return ({"id": s["id"], "raw": f"pyautogui.click({px:.2f}, {cy:.2f})", "frame": "native"},
                ("point", inside(s, (float(f"{px:.2f}"), float(f"{cy:.2f}")))))
    if mode == 2:
        p = [round(cx * rw / w), round(cy * rh / h)]
        back = (p[0] * w / rw, p[1] * h / rh)
        return {"id": s["id"], "raw": json.dumps({"coordinate": p})}, ("point", inside(s, back))
    if mode == 3:
        return {"id": s["id"], "raw": "It is probably the blue one near the top."}, ("unparsable", False)
    if mode == 4:
        return {"id": s["id"], "raw": "This action is infeasible."}, ("refusal", False)
    # mode 5: native click with x=/y= keywords, a hit
    return ({"id": s["id"], "raw": f"click(x={cx:.1f}, y={cy:.1f})", "frame": "native"},
            ("point", inside(s, (float(f"{cx:.1f}"), float(f"{cy:.1f}")))))


def inside(s, p):
    x, y, w, h = s["bbox"]
    return x <= p[0] <= x + w and y <= p[1] <= y + h


def benchmark():
    rng = random.Random(20241015)
    types, table = capability_table()
    distinct = []
    for t in types:
        if t not in distinct:
            distinct.append(t)
    samples = []
    for i in range(60):
        sid = f"s{i + 1:03d}"
        big = i % 2 == 0
        w, h = (1920, 1080) if big else (1280, 720)
        image = {"path": f"screens/bench_{i % 12:02d}.png", "width": w, "height": h}
        if big and i % 4 == 0:
            image["resized_width"], image["resized_height"] = resized(w), resized(h)
        s = {"id": sid, "image": image, "instruction": f"Find target {i + 1}"}
        if i % 3 != 0:
            s["refined_instruction"] = f"Click the element labelled target {i + 1}"
        if i % 10 == 9:
            s["bbox"] = None
            s["element_type"] = ""
            s["refusal"] = True
            s["_cap"] = "refusal"
        else:
            bw, bh = rng.randint(20, 200), rng.randint(16, 80)
            s["bbox"] = [rng.randint(0, w - bw), rng.randint(0, h - bh), bw, bh]
            et = distinct[i % len(distinct)]
            s["element_type"] = et if i % 7 else et.upper()
            s["refusal"] = False
            s["_cap"] = table[et.strip().lower()]
        samples.append(s)

    lines, verdicts = [], {}
    refined_lines, refined_verdicts = [], {}
    for i, s in enumerate(samples):
        line, v = predict(s, (i * 7) % 6)
        lines.append(line)
        verdicts[s["id"]] = v
        line, v = predict(s, (i * 5 + 1) % 6)
        refined_lines.append(line)
        refined_verdicts[s["id"]] = v

    public = [{k: v for k, v in s.items() if not k.startswith("_")} for s in samples]
    dump_jsonl(FIX / "eval" / "benchmark.jsonl", public)
    dump_jsonl(FIX / "eval" / "predictions.jsonl", lines)
    dump_jsonl(FIX / "eval" / "predictions_refined.jsonl", refined_lines)
    dump_json(FIX / "eval" / "report.golden.json", report(samples, verdicts))

    kept = [s for s in samples if "refined_instruction" in s]
    a, b = report(kept, verdicts), report(kept, refined_verdicts)
    flips = {"both_correct": 0, "fixed": 0, "broken": 0, "both_wrong": 0}
    for x, y in zip(a["samples"], b["samples"]):
        key = {(True, True): "both_correct", (False, True): "fixed",
               (True, False): "broken", (False, False): "both_wrong"}[(x["correct"], y["correct"])]
        flips[key] += 1
    dump_json(FIX / "eval" / "refined.golden.json", {
        "original": a, "refined": b, "flips": flips,
        "delta": b["overall"] - a["overall"], "excluded": len(samples) - len(kept),
    })


# ---------------------------------------------------------------- rule filter

FLAT = {"color_variance": 0.002, "edge_density": 0.01}
BUSY = {"color_variance": 0.08, "edge_density": 0.3}

# Labels assigned by reading each instruction against the rule list by hand.
LABELED = [
    ("Click at (340, 220)", None, None, "R1"),
    ("Move the pointer to (12.5, 80)", None, None, "R1"),
    ("Tap the spot ( 1020 , 44 ) twice", None, None, "R1"),
    ("Click the first child of the toolbar", None, None, "R2"),
    ("Open the parent folder entry", None, None, "R2"),
    ("Select the container holding the chart", None, None, "R2"),
    ("Expand the path breadcrumb", None, None, "R2"),
    ("Click the pricing card", None, None, "R3"),
    ("Open the second card", None, None, "R3"),
    ("Dismiss the cards", None, None, "R3"),
    ("Click the icon in the top-right of the screen", None, None, "R4"),
    ("Press the button at the bottom of the screen", None, None, "R4"),
    ("Open the menu in the left corner of the screen", None, None, "R4"),
    ("Click the red dot", None, None, "R5"),
    ("Select the circled item", None, None, "R5"),
    ("Press the highlighted row", None, None, "R5"),
    ("Click the heading", None, FLAT, "R6"),
    ("Hover over the caption", "label", FLAT, "R6"),
    ("Read the text under the logo", None, FLAT, "R6"),
    ("Drag the volume slider", None, None, "R7"),
    ("Adjust the brightness slider", None, None, "R7"),
    ("Use the slider to change zoom", None, None, "R7"),
    ("Click the Save button", None, None, None),
    ("Set the volume slider to 40", None, None, None),
    ("Click the heading", None, BUSY, None),
    ("Open the card in the sidebar", None, None, None),
    ("Press the top tab labelled Home", None, None, None),
    ("Type your name into the email field", None, FLAT, None),
    ("Select Arial from the font dropdown", None, None, None),
    ("Open the Settings menu", None, None, None),
]


def rule_fixture():
    rows = []
    for i, (text, ui, stats, rule) in enumerate(LABELED):
        row = {"id": f"f{i + 1:02d}", "instruction": text, "expected": rule}
        if ui:
            row["ui_type"] = ui
        if stats:
            row["crop_stats"] = stats
        rows.append(row)
    dump_jsonl(FIX / "filter" / "labeled.jsonl", rows)


def main():
    (FIX / "screens").mkdir(parents=True, exist_ok=True)
    slider_panel_png().save(FIX / "screens" / "slider_panel.png")
    settings_form_png().save(FIX / "screens" / "settings_form.png")
    dump_json(FIX / "trees" / "slider_panel.json", SLIDER_TREE)
    dump_json(FIX / "trees" / "settings_form.json", FORM_TREE)
    dump_json(FIX / "mock" / "pipeline.json", MOCK)
    office()
    benchmark()
    rule_fixture()


if __name__ == "__main__":
    main()
