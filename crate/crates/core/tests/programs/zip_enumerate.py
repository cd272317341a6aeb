@poppy
def main(names, hints):
    out = tuple()
    for i, pair in enumerate(zip(names, hints)):
        name, hint = pair
        out += (f"{i}:{name}:{score(hint)}",)
    print(out)
    return out

@sequential
def print(line): ...

@unordered
async def score(prompt): ...
