@poppy
def main(keys):
    table = dict()
    for k in keys:
        table[k] = score(k)
    total = 0
    for k in keys:
        total += table.get(k)
    print(table)
    return total

@sequential
def print(line): ...

@unordered
async def score(prompt): ...
