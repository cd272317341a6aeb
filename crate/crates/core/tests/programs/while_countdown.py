@poppy
def main(n):
    results = tuple()
    while n > 0:
        results += (score(f"step {n}"),)
        n -= 1
    print(results)
    return results

@sequential
def print(line): ...

@unordered
async def score(prompt): ...
