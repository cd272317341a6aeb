@poppy
def main(words):
    seen = list()
    for w in words:
        n = lookup(seen)
        seen.append(w)
        print(f"{w}: {n} {len(seen)}")
    return len(seen)

@sequential
def print(line): ...

@readonly
async def lookup(xs): ...
