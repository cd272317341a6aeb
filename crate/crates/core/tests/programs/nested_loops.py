@poppy
def main(rows, cols):
    grid = tuple()
    for r in range(rows):
        row = tuple()
        for c in range(cols):
            row += (score(f"{r},{c}"),)
        grid += (row,)
        print(f"row {r}: {sum(row)}")
    return grid

@sequential
def print(line): ...

@unordered
async def score(prompt): ...
