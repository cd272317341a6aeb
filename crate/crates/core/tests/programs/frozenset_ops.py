@poppy
def main(words):
    seen = frozenset()
    dups = 0
    for w in words:
        if w in seen:
            dups += 1
        else:
            seen |= {score(w)}
    print(f"{len(seen)} unique, {dups} repeats")
    return (sorted(seen), dups)

@sequential
def print(line): ...

@unordered
async def score(prompt): ...
