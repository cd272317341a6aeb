@poppy
def main(seed, steps):
    x = seed
    for i in range(steps):
        x = llm(f"continue {x}")
        print(f"{i}: {len(x)}")
    return x

@sequential
def print(line): ...

@unordered
async def llm(prompt): ...
