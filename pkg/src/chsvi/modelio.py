"""JSON interchange format for models.

Top-level keys: agents, states (id + per-agent private labels), actions,
observations, b0 (sparse state -> prob map), kernel (records
{s, a: [...], sp, o, p}), reward ({s, a: [...], r}, omitted entries are 0)
and discount.  Probabilities round-trip exactly (shortest-repr decimals).
"""

import json

import numpy as np
import scipy.sparse as spsp

from .envs import _derive_private
from .model import DecModel, InvalidModelError, validate_model


class ModelParseError(ValueError):
    """Malformed interchange file; the message names the offending record."""


def save_model(model: DecModel, path) -> None:
    doc = {
        "agents": model.agents,
        "states": [
            {"id": sid,
             "private": {model.agents[i]: model.private_labels[i][model.Mmap[i][k]]
                         for i in range(model.I)}}
            for k, sid in enumerate(model.states)
        ],
        "actions": {model.agents[i]: model.actions[i] for i in range(model.I)},
        "observations": model.observations,
        "b0": {model.states[k]: float(p)
               for k, p in enumerate(model.b0) if p != 0.0},
        "kernel": [],
        "reward": [],
        "discount": model.discount,
    }
    coo = model._P.tocoo()
    order = np.lexsort((coo.col, coo.row))
    for idx in order:
        row, col = int(coo.row[idx]), int(coo.col[idx])
        s, a = divmod(row, model.AT)
        o, sp = divmod(col, model.S)
        acts = model.joint_action_tuple(a)
        doc["kernel"].append({
            "s": model.states[s],
            "a": [model.actions[i][ai] for i, ai in enumerate(acts)],
            "sp": model.states[sp],
            "o": model.observations[o],
            "p": float(coo.data[idx]),
        })
    for row in range(model.S * model.AT):
        if model._r[row] != 0.0:
            s, a = divmod(row, model.AT)
            acts = model.joint_action_tuple(a)
            doc["reward"].append({
                "s": model.states[s],
                "a": [model.actions[i][ai] for i, ai in enumerate(acts)],
                "r": float(model._r[row]),
            })
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_model(path) -> DecModel:
    """Parse and validate an interchange file.

    Raises ModelParseError naming the offending record on structural
    problems and InvalidModelError when the parsed model violates the
    probability/label invariants.
    """
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ModelParseError(f"not valid JSON: {err}") from err

    try:
        agents = list(doc["agents"])
        state_docs = doc["states"]
        action_map = doc["actions"]
        observations = list(doc["observations"])
        discount = float(doc["discount"])
    except KeyError as err:
        raise ModelParseError(f"missing top-level key {err}") from err

    states = []
    label_columns = [[] for _ in agents]
    for k, sd in enumerate(state_docs):
        if "id" not in sd:
            raise ModelParseError(f"states[{k}]: missing id")
        states.append(sd["id"])
        priv = sd.get("private", {})
        for i, ag in enumerate(agents):
            if ag not in priv:
                raise ModelParseError(
                    f"states[{k}] ({sd['id']}): no private label for {ag}")
            label_columns[i].append(priv[ag])
    private_labels, Mmap = _derive_private(label_columns)

    try:
        actions = [list(action_map[ag]) for ag in agents]
    except KeyError as err:
        raise ModelParseError(f"actions: missing agent {err}") from err

    sindex = {sid: k for k, sid in enumerate(states)}
    oindex = {oid: k for k, oid in enumerate(observations)}
    aindex = [{aid: k for k, aid in enumerate(acts)} for acts in actions]
    S = len(states)
    AT = int(np.prod([len(a) for a in actions]))
    A = tuple(len(a) for a in actions)

    def action_row(rec, where):
        alist = rec.get("a")
        if not isinstance(alist, list) or len(alist) != len(agents):
            raise ModelParseError(f"{where}: a must list one action per agent")
        acts = []
        for i, aid in enumerate(alist):
            if aid not in aindex[i]:
                raise ModelParseError(
                    f"{where}: unknown action {aid!r} for {agents[i]}")
            acts.append(aindex[i][aid])
        return int(np.ravel_multi_index(tuple(acts), A))

    def state_of(rec, key, where):
        sid = rec.get(key)
        if sid not in sindex:
            raise ModelParseError(f"{where}: unknown state {sid!r}")
        return sindex[sid]

    b0 = np.zeros(S)
    for sid, p in doc.get("b0", {}).items():
        if sid not in sindex:
            raise ModelParseError(f"b0: unknown state {sid!r}")
        b0[sindex[sid]] = float(p)

    rows, cols, vals = [], [], []
    for k, rec in enumerate(doc.get("kernel", [])):
        where = f"kernel[{k}]"
        s = state_of(rec, "s", where)
        sp = state_of(rec, "sp", where)
        oid = rec.get("o")
        if oid not in oindex:
            raise ModelParseError(f"{where}: unknown observation {oid!r}")
        rows.append(s * AT + action_row(rec, where))
        cols.append(oindex[oid] * S + sp)
        vals.append(float(rec["p"]))
    P = spsp.csr_matrix((vals, (rows, cols)),
                        shape=(S * AT, len(observations) * S))

    r = np.zeros(S * AT)
    for k, rec in enumerate(doc.get("reward", [])):
        where = f"reward[{k}]"
        s = state_of(rec, "s", where)
        r[s * AT + action_row(rec, where)] = float(rec["r"])

    model = DecModel(agents, states, actions, private_labels, Mmap,
                     observations, b0, P, r, discount)
    bad = validate_model(model)
    if bad:
        raise InvalidModelError(bad)
    return model
