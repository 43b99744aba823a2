#!/usr/bin/env python3
"""Writes the bundled scenario files into scenarios/.

Scenario geometry (keyframe timing, throw arcs, catch points, strike ticks) is
derived here so the numbers inside the JSON stay mutually consistent. Task
constants such as peg-strike depth or contact radii are reconstructions; each
file says so in its notes.

Usage: tools/gen_scenarios.py [--outdir DIR] [--golden CLI]
With --golden, runs each scenario through the given clonemator binary and
rewrites golden_hashes.json from the final world hashes.
"""

import argparse
import json
import math
import subprocess
from pathlib import Path

RATE = 60.0
DT = 1.0 / RATE
G = 9.81
VERSION = "clonemator-scenario/1"

REST = {
    "head": (0.0, 1.6, 0.0),
    "left_hand": (0.3, 1.0, 0.2),
    "right_hand": (-0.3, 1.0, 0.2),
    "left_grab": False,
    "right_grab": False,
}
RECONSTRUCTED = "Task constants (contact radii, effect deltas, prop placement) are reconstructions, not measured values."


def r9(v):
    return [round(x, 9) + 0.0 for x in v]


def add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def scale(a, s):
    return tuple(x * s for x in a)


def norm(a):
    return math.sqrt(sum(x * x for x in a))


def rot_y(deg, v):
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    x, y, z = v
    return (x * c + z * s, y, -x * s + z * c)


def pose(p, yaw=None):
    j = {"p": r9(p)}
    if yaw is not None:
        j["yaw"] = yaw
    return j


class Script:
    def __init__(self, name, description, ticks, notes=RECONSTRUCTED):
        self.doc = {
            "version": VERSION,
            "name": name,
            "description": description,
            "notes": notes,
            "ticks": ticks,
            "objects": [],
            "contact_rules": [],
            "timeline": [],
            "assertions": [],
        }
        self.frames = {0: dict(REST)}

    def config(self, **kw):
        self.doc.setdefault("config", {}).update(kw)

    def obj(self, name, tag, p, yaw=None, grabbable=False, **state):
        o = {"name": name, "tag": tag, "pose": pose(p, yaw)}
        if grabbable:
            o["grabbable"] = True
        if state:
            o["scalar_state"] = state
        self.doc["objects"].append(o)

    def rule(self, name, actor, target, max_distance, min_speed=0.0, direction=None, effect=None):
        r = {"name": name, "actor_tag": actor, "target_tag": target, "max_distance": max_distance}
        if min_speed:
            r["min_relative_speed"] = min_speed
        if direction:
            r["direction"] = list(direction)
        if effect:
            r["effect"] = {"key": effect[0], "delta": effect[1]}
        self.doc["contact_rules"].append(r)

    def key(self, tick, **joints):
        self.frames.setdefault(tick, {}).update(joints)

    def cmd(self, tick, command, bind=None):
        step = {"tick": tick, "command": command}
        if bind:
            step["bind"] = bind
        self.doc["timeline"].append(step)

    def check(self, tick, kind, label=None, **args):
        a = {"tick": tick, "kind": kind}
        if label:
            a["label"] = label
        a.update(args)
        self.doc["assertions"].append(a)

    # Input as the runner computes it: full keyframes merged forward, positions
    # interpolated linearly, grab flags stepping at keyframes.
    def full_keyframes(self):
        out = []
        cur = dict(REST)
        for t in sorted(self.frames):
            cur = dict(cur)
            cur.update(self.frames[t])
            out.append((t, cur))
        return out

    def input_at(self, tick):
        kf = self.full_keyframes()
        prev = kf[0]
        for k in kf:
            if k[0] <= tick:
                prev = k
            else:
                nxt = k
                u = (tick - prev[0]) / (nxt[0] - prev[0])
                body = dict(prev[1])
                for j in ("head", "left_hand", "right_hand"):
                    body[j] = add(prev[1][j], scale(sub(nxt[1][j], prev[1][j]), u))
                return body
        return prev[1]

    def emit(self, outdir):
        timeline = list(self.doc["timeline"])
        prev = dict(REST)
        for t, body in self.full_keyframes():
            delta = {}
            for j in ("head", "left_hand", "right_hand"):
                if body[j] != prev[j]:
                    delta[j] = pose(body[j])
            for g in ("left_grab", "right_grab"):
                if body[g] != prev[g]:
                    delta[g] = body[g]
            prev = body
            if t == 0:
                if delta:
                    self.doc["avatar"] = {"body": delta}
                continue
            if not delta:
                # Hold keyframe: restating one joint stops interpolation toward the next key.
                delta["head"] = pose(body["head"])
            timeline.append({"tick": t, "input": delta})
        # Commands before inputs on a shared tick keeps the listing readable;
        # the runner applies commands first regardless.
        timeline.sort(key=lambda s: (s["tick"], "input" in s))
        self.doc["timeline"] = timeline
        path = Path(outdir) / (self.doc["name"] + ".json")
        path.write_text(json.dumps(self.doc, indent=2) + "\n")
        return path


def contact_ticks(position, target, max_distance, min_speed, ticks, direction=None, first=0):
    """Ticks where a prop at position(t) newly satisfies the contact predicate
    against a static `target`. Without a direction the speed is the magnitude."""
    hits = []
    latched = False
    prev = None
    for t in range(first, ticks):
        p = position(t)
        if prev is not None:
            v = scale(sub(p, prev), RATE)
            if direction is None:
                speed = norm(v)
            else:
                speed = sum(a * b for a, b in zip(v, direction))
            met = norm(sub(p, target)) <= max_distance and speed >= min_speed
            if met and not latched:
                hits.append(t)
            latched = met
        prev = p
    return hits


def hammering(out):
    s = Script("hammering", "Auto-spawned clones hammer four pegs at once", 340)
    s.obj("hammer", "hammer", (-0.3, 1.0, 0.2), grabbable=True)
    pegs = [
        ("peg1", (-0.3, 0.1, 0.5), 0),
        ("peg2", (2.0, 0.1, 3.0), 90),
        ("peg3", (-2.5, 0.1, 4.0), -90),
        ("peg4", (0.5, 0.1, 6.5), 180),
    ]
    for name, p, yaw in pegs:
        s.obj(name, "peg", p, yaw, depth=0.0)
    s.rule("strike", "hammer", "peg", 0.1, 1.0, (0, -1, 0), ("depth", 0.025))

    raised = (-0.3, 0.6, 0.5)
    down = (-0.3, 0.12, 0.5)
    s.key(2, right_grab=True)
    s.key(20, head=(0.0, 1.1, 0.1), left_hand=(0.3, 0.7, 0.3), right_hand=raised)
    s.cmd(25, {"op": "spawn_auto", "selected": "peg1"}, bind="crew")
    for k in range(10):
        t0 = 30 + 30 * k
        s.key(t0, right_hand=raised)
        s.key(t0 + 8, right_hand=down)
        s.key(t0 + 14, right_hand=down)
        s.key(t0 + 22, right_hand=raised)

    hits = contact_ticks(lambda t: s.input_at(t)["right_hand"], pegs[0][1], 0.1, 1.0, 340, (0, -1, 0))
    assert len(hits) == 10, hits

    s.check(26, "entity_count", "three clones spawned", what="clones", expected=3)
    s.check(26, "entity_count", "each clone got a hammer", what="objects", tag="hammer", expected=4)
    offset = {"t": [0.3, -0.1, -0.5]}
    for i, (name, _, _) in enumerate(pegs[1:]):
        s.check(26, "relative_transform_equals", f"offset at {name}", a=name, b=f"crew[{i}]",
                expected=offset, tolerance=1e-9)
    s.check(26, "relative_transform_equals", "avatar offset at the selected peg", a="peg1", b="$avatar",
            expected=offset, tolerance=1e-9)
    for n, t in enumerate(hits):
        s.check(t, "event_count_equals", f"strike {n + 1} lands on all pegs", rule="strike", window="tick",
                expected=4)
    s.check(hits[6], "event_count_equals", "seven strikes before the target depth", rule="strike", expected=28)
    s.check(hits[7], "scalar_state_at_least", "all pegs reach 0.2 m on strike eight",
            entities=[p[0] for p in pegs], key="depth", min=0.2)
    s.check(339, "event_count_equals", "ten strikes per peg", rule="strike", expected=40)
    return s.emit(out)


def mirrored_net(out):
    s = Script("mirrored_net", "Relative-spawned mirrored clone spreads a net, then both are grouped and moved", 170)
    s.obj("handle_a", "handle", (-0.3, 1.0, 0.5), grabbable=True)
    s.obj("handle_b", "handle", (0.3, 1.0, 3.5), 180, grabbable=True)
    s.cmd(5, {"op": "spawn_relative", "reference": "handle_a", "target": "handle_b"}, bind="partner")
    s.key(20, right_hand=(-0.3, 1.0, 0.5), left_hand=(0.3, 1.0, 0.5))
    s.key(25, right_grab=True, left_grab=True)
    s.check(26, "entity_count", "partner holds the far handle", what="objects", held_by="partner", expected=1)
    s.check(26, "entity_count", "avatar holds the near handle", what="objects", held_by="$avatar", expected=1)
    s.cmd(30, {"op": "set_mirror", "clone": "partner", "on": True})
    s.check(31, "pose_equals", "mirroring does not move the held handle", entity="handle_b",
            expected=pose((0.3, 1.0, 3.5)), position_only=True, tolerance=1e-9)

    s.key(40, head=(0.0, 1.6, 0.0))
    s.key(80, head=(0.0, 1.6, -0.3), right_hand=(-0.3, 1.0, 0.2), left_hand=(0.3, 1.0, 0.2))
    s.check(81, "pose_equals", "user leans back", entity="handle_a", expected=pose((-0.3, 1.0, 0.2)),
            position_only=True, tolerance=1e-9)
    s.check(81, "pose_equals", "clone leans back too, spreading the net", entity="handle_b",
            expected=pose((0.3, 1.0, 3.8)), position_only=True, tolerance=1e-9)

    s.key(100, head=(0.0, 1.6, -0.3))
    s.key(140, head=(-0.3, 1.6, -0.3), right_hand=(-0.6, 1.0, 0.2), left_hand=(0.0, 1.0, 0.2))
    s.check(141, "pose_equals", "user steps right", entity="handle_a", expected=pose((-0.6, 1.0, 0.2)),
            position_only=True, tolerance=1e-9)
    s.check(141, "pose_equals", "facing clone moves the same world direction", entity="handle_b",
            expected=pose((0.0, 1.0, 3.8)), position_only=True, tolerance=1e-9)

    s.cmd(150, {"op": "set_mode", "clone": "partner", "mode": "static"})
    s.cmd(151, {"op": "spawn_direct"}, bind="holder")
    s.cmd(152, {"op": "set_group", "members": ["partner", "holder"]}, bind="team")
    s.check(152, "relative_transform_equals", "group layout before the move", a="partner", b="holder",
            capture_as="team_layout")
    s.cmd(155, {"op": "move", "target": "partner", "new_root": {"t": [1.0, 0.0, 5.0], "yaw": 180}})
    s.check(160, "relative_transform_equals", "group layout after the move", a="partner", b="holder",
            expected_capture="team_layout")
    s.check(160, "pose_equals", "near handle carried by the group move", entity="handle_a",
            expected=pose((0.4, 1.0, 1.2)), position_only=True, tolerance=1e-9)
    s.check(160, "pose_equals", "far handle carried by the group move", entity="handle_b",
            expected=pose((1.0, 1.0, 4.8)), position_only=True, tolerance=1e-9)
    return s.emit(out)


def step_stool(out):
    s = Script("step_stool", "A crouched static clone serves as a step stool to reach beef at 2.5 m", 110)
    s.config(max_reach=0.7, grab_radius=0.1)
    beef = (-0.2, 2.5, 0.4)
    s.obj("beef", "beef", beef, grabbable=True)

    s.key(10, right_hand=beef)
    s.key(20, right_grab=True)
    head = (0.0, 1.6, 0.0)
    d = sub(beef, head)
    clamped = add(head, scale(d, 0.7 / norm(d)))
    s.check(21, "pose_equals", "reach is limited from the ground", entity="$avatar", joint="right_hand",
            expected=pose(clamped), position_only=True, tolerance=1e-9)
    s.check(21, "entity_count", "beef out of reach from the ground", what="objects", held_by="$avatar", expected=0)

    s.key(25, right_grab=False)
    crouch_head = (0.0, 0.9, 0.1)
    s.key(40, head=crouch_head, left_hand=(0.3, 0.5, 0.3), right_hand=(-0.3, 0.5, 0.3))
    s.key(46, head=crouch_head)
    s.cmd(45, {"op": "spawn_direct"}, bind="stool")
    s.key(60, head=(0.0, 1.6, 0.0), left_hand=(0.3, 1.0, 0.2), right_hand=(-0.3, 1.0, 0.2))
    s.cmd(65, {"op": "step_onto", "target": "stool"})
    s.check(66, "pose_equals", "standing on the stool's head", entity="$avatar", joint="root",
            expected=pose(crouch_head), position_only=True, tolerance=1e-9)

    reach_local = sub(beef, crouch_head)
    s.key(90, right_hand=reach_local)
    s.key(95, right_grab=True)
    s.check(96, "entity_count", "beef grabbed from the stool", what="objects", tag="beef", held_by="$avatar",
            expected=1)
    s.check(96, "pose_equals", "hand at 2.5 m", entity="$avatar", joint="right_hand", expected=pose(beef),
            position_only=True, tolerance=1e-9)
    s.cmd(100, {"op": "avatar_locomote", "kind": "teleport", "to": [1.0, 0.0, -1.0]})
    s.check(101, "pose_equals", "beef comes down with the avatar", entity="beef",
            expected=pose(add((1.0, 0.0, -1.0), reach_local)), position_only=True, tolerance=1e-9)
    return s.emit(out)


def apple_fetch(out):
    s = Script("apple_relative_fetch", "Relative spawning places a clone at a 7.5 m apple via a gas cylinder", 120)
    s.obj("cylinder", "gas_cylinder", (0.0, 1.0, 0.6))
    apple = (2.0, 7.5, 5.0)
    s.obj("apple", "apple", apple, grabbable=True)
    offset = {"t": [0.0, -1.0, -0.6]}

    s.cmd(5, {"op": "spawn_relative", "reference": "cylinder", "target": "apple"}, bind="helper")
    s.check(6, "relative_transform_equals", "avatar offset from the cylinder", a="cylinder", b="$avatar",
            expected=offset, tolerance=1e-9)
    s.check(6, "relative_transform_equals", "same offset from the apple", a="apple", b="helper",
            expected=offset, tolerance=1e-9)
    s.cmd(10, {"op": "switch_control", "target": "helper"})
    s.check(11, "pose_equals", "control moves to the clone", entity="$avatar", joint="root",
            expected=pose((2.0, 6.5, 4.4)), position_only=True, tolerance=1e-9)
    s.key(40, right_hand=(0.0, 1.0, 0.6))
    s.key(45, right_grab=True)
    s.check(46, "entity_count", "apple in the helper's hand", what="objects", held_by="helper", expected=1)
    s.check(46, "pose_equals", "hand at 7.5 m", entity="helper", joint="right_hand", expected=pose(apple),
            position_only=True, tolerance=1e-9)
    s.cmd(60, {"op": "switch_control", "target": "$original"})
    s.cmd(61, {"op": "remove_clone", "target": "helper"})
    s.key(70, right_grab=False)
    s.check(62, "entity_count", "helper removed", what="clones", expected=0)
    s.check(119, "pose_equals", "apple dropped at the user's feet", entity="apple",
            expected=pose((0.0, 0.0, 0.5)), position_only=True, tolerance=1e-9)
    return s.emit(out)


def simulate_throw(p_prev, p_rel, max_ticks=400):
    """Ball path after a release at hand position p_rel, previous hand p_prev.
    Returns positions after each tick's settle step, starting with the release tick."""
    v = scale(sub(p_rel, p_prev), RATE)
    p = p_rel
    out = []
    for _ in range(max_ticks):
        v = (v[0], v[1] - G * DT, v[2])
        p = add(p, scale(v, DT))
        if p[1] <= 0.0:
            out.append((p[0], 0.0, p[2]))
            break
        out.append(p)
    return out


def ball_pass(out):
    balls = 4
    period = 100
    s = Script("ball_pass_9m", "Ballistic throws caught by a synchronous clone 9 m away, no teleport",
               40 + period * balls + 60)
    s.config(ballistic=True)
    rack = [(-0.55, 1.0, 0.0 - 0.3 * k) for k in range(balls)]
    for k, p in enumerate(rack):
        s.obj(f"ball{k + 1}", "ball", p, grabbable=True)

    p0 = (-0.3, 1.2, -0.3)
    p1 = (-0.3, 1.84, 0.34)
    throw_ticks = 6
    path = simulate_throw(add(p0, scale(sub(p1, p0), (throw_ticks - 1) / throw_ticks)), p1)
    # path[i] is the ball after tick R + i; a grab at tick T sees path[T - R - 1].
    best = min(
        (i for i in range(1, len(path)) if path[i][1] < path[i - 1][1] and 0.9 < path[i][1] < 2.2),
        key=lambda i: abs(math.hypot(path[i][0], path[i][2]) - 9.0),
    )
    catch = path[best]
    catch_delay = best + 1
    local_catch = (0.3, catch[1], 0.4)
    root = sub(catch, rot_y(180, local_catch))
    assert abs(root[1]) < 1e-12

    s.cmd(5, {"op": "spawn_indirect", "target": pose((root[0], 0.0, root[2]), 180), "snap": "none"}, bind="catcher")
    s.cmd(6, {"op": "set_mode", "clone": "catcher", "mode": "synchronous"})
    s.key(10, left_hand=local_catch)
    releases = []
    for k in range(balls):
        b = 30 + period * k
        s.key(b, right_hand=rack[k], right_grab=True)
        s.key(b + 15, right_hand=p0)
        s.key(b + 15 + throw_ticks, right_hand=p1, right_grab=False)
        s.key(b + 45, right_hand=(-0.3, 1.0, 0.2))
        r = b + 15 + throw_ticks
        releases.append(r)
        s.key(r + catch_delay, left_grab=True)
        s.key(r + catch_delay + 20, left_grab=False)
    for k, r in enumerate(releases):
        s.check(r + catch_delay, "entity_count", f"ball {k + 1} caught", what="objects", tag="ball",
                held_by="catcher", expected=1)
    end = s.doc["ticks"] - 1
    s.check(end, "entity_count", "at least three balls delivered 9 m out", what="objects", tag="ball",
            region={"min": [-1.0, -0.01, 8.5], "max": [1.0, 0.01, 9.5]}, min=3)
    s.check(end, "pose_equals", "first ball rests below the catch point", entity="ball1",
            expected=pose((catch[0], 0.0, catch[2])), position_only=True, tolerance=1e-6)
    s.check(end, "pose_equals", "avatar never teleported", entity="$avatar", joint="root",
            expected=pose((0.0, 0.0, 0.0), 0), tolerance=1e-12)
    return s.emit(out)


def bucket_brigade(out):
    s = Script("bucket_brigade", "Four stacked clones, alternately mirrored, pass a bucket up to a roof fire", 240)
    s.obj("bucket", "bucket", (-0.3, 0.9, 0.4), grabbable=True)
    s.obj("fire", "fire", (-0.3, 7.2, 0.4), doused=0.0)
    s.rule("douse", "bucket", "fire", 0.15, effect=("doused", 1.0))

    s.cmd(5, {"op": "spawn_direct"}, bind="c1")
    for lower, upper in (("c1", "c2"), ("c2", "c3"), ("c3", "c4")):
        s.cmd(5, {"op": "step_onto", "target": lower})
        s.cmd(5, {"op": "spawn_direct"}, bind=upper)
    s.cmd(5, {"op": "avatar_locomote", "kind": "teleport", "to": [0.0, 0.0, -3.0]})
    for c in ("c1", "c2", "c3", "c4"):
        s.cmd(6, {"op": "set_mode", "clone": c, "mode": "synchronous"})
    for c in ("c2", "c4"):
        s.cmd(6, {"op": "set_mirror", "clone": c, "on": True})
    for n, c in enumerate(("c1", "c2", "c3", "c4")):
        s.check(7, "pose_equals", f"{c} stands on the one below", entity=c, joint="root",
                expected=pose((0.0, 1.6 * n, 0.0), 0), tolerance=1e-9)

    phase_a = dict(left_hand=(0.3, 2.5, 0.4), right_hand=(-0.3, 0.9, 0.4), left_grab=False, right_grab=True)
    phase_b = dict(left_hand=(0.3, 0.9, 0.4), right_hand=(-0.3, 2.5, 0.4), left_grab=True, right_grab=False)
    ticks = [30, 60, 90, 120, 150]
    for i, t in enumerate(ticks):
        s.key(t, **(phase_a if i % 2 == 0 else phase_b))
    for t, holder in zip(ticks[:4], ("c1", "c2", "c3", "c4")):
        s.check(t, "entity_count", f"bucket reaches {holder}", what="objects", tag="bucket", held_by=holder,
                expected=1)
    s.check(ticks[4] - 1, "event_count_equals", "top clone douses the fire", rule="douse", expected=1)
    s.check(239, "scalar_state_at_least", "fire doused", entity="fire", key="doused", min=1.0)
    return s.emit(out)


def circle_keys(s, hand, center, radius, start, end, period=60, step=5, phase_tick=0):
    for t in range(start, end + 1, step):
        a = 2 * math.pi * (t - phase_tick) / period
        s.key(t, **{hand: (center[0] + radius * math.cos(a), center[1], center[2] + radius * math.sin(a))})


def stir_pot(out):
    s = Script("stir_pot", "A replayed stirring recording keeps the pot stirred while the user adds an apple", 900)
    s.obj("spoon", "spoon", (-0.3, 1.0, 0.2), grabbable=True)
    s.obj("pot", "pot", (-0.3, 0.9, 0.55), stirred=0.0, ingredients=0.0)
    s.obj("apple", "apple", (0.3, 1.0, -0.3), grabbable=True)
    s.rule("stir", "spoon", "pot", 0.2, 0.3, effect=("stirred", 1.0))
    s.rule("add_ingredient", "apple", "pot", 0.45, effect=("ingredients", 1.0))

    s.key(2, right_grab=True)
    center = (-0.2, 1.0, 0.55)
    s.key(15, right_hand=(center[0] + 0.2, center[1], center[2]))
    circle_keys(s, "right_hand", center, 0.2, 20, 165, phase_tick=20)
    s.cmd(41, {"op": "start_recording", "scope": "poses_and_grabs"})
    s.cmd(161, {"op": "stop_recording"}, bind="stirring")
    s.cmd(162, {"op": "spawn_direct"}, bind="cook")
    s.cmd(162, {"op": "apply_recording", "recording": "stirring", "target": {"clone": "cook"}})
    s.key(180, right_hand=(-0.3, 1.0, 0.2))
    s.key(190, left_grab=True)
    s.key(220, left_hand=(-0.3, 1.3, 1.05))
    s.key(230, left_grab=False)

    s.check(162, "entity_count", "spoon handed to the clone", what="objects", tag="spoon", held_by="cook",
            expected=1)
    for k in range(1, 7):
        s.check(162 + 120 * k - 1, "event_count_equals", f"replay loop {k} keeps stirring", rule="stir",
                from_tick=162, min=2 * k)
    # The replaying clone stands at the origin, so its spoon follows the recorded input.
    replay = contact_ticks(lambda t: s.input_at(40 + (t - 162) % 120)["right_hand"], (-0.3, 0.9, 0.55), 0.2, 0.3,
                           900, first=162)
    s.check(899, "event_count_equals", "one stir contact per revolution", rule="stir", from_tick=162,
            expected=len(replay))
    s.check(899, "scalar_state_at_least", "apple went in", entity="pot", key="ingredients", min=1.0)
    return s.emit(out)


def dance(out):
    s = Script("dance_phase_shift", "One recording drives a four-clone group with 0.5 s phase steps", 300)
    # Arm wave with a 2 s period: left hand rises while the right falls.
    for t in range(20, 160, 10):
        a = 2 * math.pi * (t - 20) / 120
        s.key(t, left_hand=(0.45, 1.5 + 0.4 * math.sin(a), 0.2), right_hand=(-0.45, 1.5 - 0.4 * math.sin(a), 0.2))
    s.key(170, left_hand=(0.3, 1.0, 0.2), right_hand=(-0.3, 1.0, 0.2))
    s.cmd(31, {"op": "start_recording", "scope": "poses_and_grabs"})
    s.cmd(151, {"op": "stop_recording"}, bind="wave")
    names = []
    for i, x in enumerate((-3.0, -1.0, 1.0, 3.0)):
        name = f"dancer{i + 1}"
        names.append(name)
        s.cmd(152, {"op": "spawn_indirect", "target": pose((x, 0.0, 3.0), 180), "snap": "grid"}, bind=name)
    s.cmd(153, {"op": "set_group", "members": names}, bind="troupe")
    s.cmd(160, {"op": "apply_recording", "recording": "wave", "target": {"group": "troupe", "delta": 0.5}})

    def recorded(t_frame):
        return s.input_at(30 + t_frame)["right_hand"]

    for t in (200, 230):
        for i, name in enumerate(names):
            j = (t - 160 - 30 * i) % 120
            s.check(t, "pose_equals", f"{name} lags by {0.5 * i} s", entity=name, joint="right_hand", frame="root",
                    expected=pose(recorded(j)), position_only=True, tolerance=1e-9)
    s.check(200, "pose_equals", "grid snap places the second dancer", entity="dancer2", joint="root",
            expected=pose((-0.75, 0.0, 3.0), 180), tolerance=1e-9)
    s.check(255, "relative_transform_equals", "troupe layout", a="dancer1", b="dancer4", capture_as="layout")
    s.cmd(260, {"op": "move", "target": "dancer1", "new_root": {"t": [-3.0, 0.0, 4.0], "yaw": 180}})
    s.check(265, "relative_transform_equals", "troupe layout kept", a="dancer1", b="dancer4",
            expected_capture="layout")
    s.check(265, "pose_equals", "whole group moved", entity="dancer4", joint="root",
            expected=pose((3.0, 0.0, 4.0), 180), tolerance=1e-9)
    return s.emit(out)


def fanning_cutting(out):
    s = Script("fanning_cutting", "A synchronous clone fans the campfire while the user cuts beef", 250)
    helper_pose = ((4.0, 0.0, 3.0), 90)
    hand_local = (-0.3, 1.0, 0.45)
    target_local = (-0.3, 0.85, 0.45)

    def helper_world(p):
        return add(helper_pose[0], rot_y(helper_pose[1], p))

    s.obj("fan", "fan", helper_world(hand_local), helper_pose[1], grabbable=True)
    s.obj("fire", "fire", helper_world(target_local), fanned=0.0)
    s.obj("knife", "knife", hand_local, grabbable=True)
    s.obj("beef", "beef", target_local, cuts=0.0)
    s.rule("cut", "knife", "beef", 0.12, 0.8, (0, -1, 0), ("cuts", 1.0))
    s.rule("fan", "fan", "fire", 0.12, 0.8, (0, -1, 0), ("fanned", 1.0))

    s.cmd(5, {"op": "spawn_indirect", "target": pose(*helper_pose), "snap": "none"}, bind="helper")
    s.cmd(10, {"op": "switch_control", "target": "helper"})
    s.key(30, right_hand=hand_local)
    s.key(32, right_grab=True)
    s.check(33, "entity_count", "fan picked up through the clone", what="objects", tag="fan", held_by="helper",
            expected=1)
    s.cmd(40, {"op": "switch_control", "target": "$original"})
    s.key(45, right_grab=False)
    s.key(50, right_grab=True)
    s.check(51, "entity_count", "knife in the user's hand", what="objects", tag="knife", held_by="$avatar",
            expected=1)
    s.cmd(55, {"op": "set_mode", "clone": "helper", "mode": "synchronous"})

    up = (-0.3, 1.3, 0.45)
    down = (-0.3, 0.95, 0.45)
    for k in range(6):
        t0 = 60 + 30 * k
        s.key(t0, right_hand=up)
        s.key(t0 + 10, right_hand=up)
        s.key(t0 + 16, right_hand=down)
        s.key(t0 + 22, right_hand=down)
    s.key(250 - 10, right_hand=up)

    hits = contact_ticks(lambda t: s.input_at(t)["right_hand"], target_local, 0.12, 0.8, 250, (0, -1, 0))
    assert len(hits) == 6, hits
    for n, t in enumerate(hits):
        s.check(t, "event_count_equals", f"cut {n + 1}", rule="cut", window="tick", expected=1)
        s.check(t, "event_count_equals", f"fan stroke {n + 1} on the same tick", rule="fan", window="tick",
                expected=1)
    s.check(249, "scalar_state_at_least", "both tasks progressed", entities=["beef"], key="cuts", min=6.0)
    s.check(249, "scalar_state_at_least", "fire fanned", entity="fire", key="fanned", min=6.0)
    return s.emit(out)


def teleport_automator(out):
    s = Script("teleport_automator", "Recorded spawn, switch and remove compose into a reusable teleport", 60)
    s.cmd(5, {"op": "start_recording", "scope": "extended"})
    s.cmd(6, {"op": "spawn_indirect", "target": pose((0.0, 0.0, 3.0), 0), "snap": "none"}, bind="ahead")
    s.cmd(7, {"op": "switch_control", "target": "ahead"})
    s.cmd(8, {"op": "remove_clone", "target": "$original"})
    s.cmd(10, {"op": "stop_recording"}, bind="teleport")
    s.check(11, "pose_equals", "demonstration moved the user 3 m", entity="$avatar", joint="root",
            expected=pose((0.0, 0.0, 3.0), 0), tolerance=1e-9)
    s.check(11, "entity_count", "no clones left after the demonstration", what="clones", expected=0)
    s.check(11, "hash_equals", "state after the demonstration", capture_as="after_demo")
    s.cmd(20, {"op": "apply_recording", "recording": "teleport", "target": "self"})
    s.check(30, "pose_equals", "replay teleports by the recorded offset", entity="$avatar", joint="root",
            expected=pose((0.0, 0.0, 6.0), 0), tolerance=1e-9)
    s.check(30, "entity_count", "replay leaves no clones", what="clones", expected=0)
    s.cmd(35, {"op": "avatar_locomote", "kind": "rotate", "yaw_delta": 90})
    s.cmd(40, {"op": "apply_recording", "recording": "teleport", "target": "self"})
    s.check(50, "pose_equals", "offset follows the user's heading", entity="$avatar", joint="root",
            expected=pose((3.0, 0.0, 6.0), 90), tolerance=1e-9)
    s.check(59, "entity_count", "net clone count is zero", what="clones", expected=0)
    return s.emit(out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--outdir", type=Path, default=Path(__file__).resolve().parent.parent / "scenarios")
    ap.add_argument("--golden", help="clonemator binary used to record final hashes")
    args = ap.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)
    paths = [make(args.outdir) for make in (hammering, mirrored_net, step_stool, apple_fetch, ball_pass,
                                            bucket_brigade, stir_pot, dance, fanning_cutting, teleport_automator)]
    for p in paths:
        print(p)
    if args.golden:
        hashes = {}
        for p in sorted(paths):
            run = subprocess.run([args.golden, "run", "--hash", str(p)], capture_output=True, text=True, check=True)
            hashes[p.name] = run.stdout.strip()
        (args.outdir / "golden_hashes.json").write_text(json.dumps(hashes, indent=2) + "\n")


if __name__ == "__main__":
    main()
