@poppy
def apply_all(f, xs):
    out = tuple()
    for x in xs:
        out += (f(x),)
    return out

@poppy
def double_score(x):
    return 2 * score(x)

@poppy
def main(xs):
    doubled = apply_all(double_score, xs)
    printed = apply_all(print, doubled)
    return (doubled, len(printed))

@sequential
def print(line): ...

@unordered
async def score(prompt): ...
