@poppy
def pair(x):
    return (score(x), score(f"{x}!"))

@poppy
def main(xs):
    lo = 0
    hi = 0
    for x in xs:
        a, b = pair(x)
        lo += min(a, b)
        hi += max(a, b)
    print(f"{lo} {hi}")
    return (lo, hi)

@sequential
def print(line): ...

@unordered
async def score(prompt): ...
