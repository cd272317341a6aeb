@poppy
def main(limit):
    total = 0
    rounds = 0
    while total < limit:
        s = score(f"round {rounds}")
        total += s
        rounds += 1
        print(f"round {rounds}: {total}")
    return (total, rounds)

@sequential
def print(line): ...

@unordered
async def score(prompt): ...
