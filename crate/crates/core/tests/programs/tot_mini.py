NUM_STEPS = 2
BEAM_WIDTH = 3

@poppy
def tree_of_thoughts(task):
    states = ("",)
    for step in range(NUM_STEPS):
        new_states = tuple()
        for s in states:
            new_states += llm_get_proposals(task, s)
        values = get_values(task, new_states)
        states = topk(new_states, values, BEAM_WIDTH)
        print(states)
    return states

@poppy
def get_values(task, states):
    value_cache = frozenset()
    values = tuple()
    for idx, state in enumerate(states):
        if state in value_cache:
            value = 0
            print(f"{idx}: duplicate")
        else:
            value = llm_get_value(task, state)
            value_cache |= {state}
            print(f"{idx}: {value}")
        values += (value,)
    return values

@poppy
def llm_get_proposals(task, state):
    reply = llm(f"propose next steps after {state} for {task}")
    return tuple(reply.split("\n"))

@poppy
def llm_get_value(task, state):
    return len(llm(f"value of {state} for {task}"))

@sequential
def print(line): ...

@unordered
async def llm(prompt): ...
