@poppy
def main(xs):
    kept = tuple()
    for x in xs:
        s = score(x)
        if s > 10 and s < 90 or x == "always":
            kept += (x,)
        if not s % 2 == 0:
            print(f"odd {x}")
    return kept

@sequential
def print(line): ...

@unordered
async def score(prompt): ...
