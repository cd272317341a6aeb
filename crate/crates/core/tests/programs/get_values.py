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
def llm_get_value(task, state):
    return llm(f"value of {state} for {task}")

@sequential
def print(line): ...

@unordered
async def llm(prompt): ...
