N = 10

@poppy
def main():
    results = tuple()
    for i in range(N):
        results += (score(f"item {i}"),)
    return results

@unordered
async def score(prompt): ...
