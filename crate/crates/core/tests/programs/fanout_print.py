@poppy
def main(topics):
    drafts = tuple()
    for t in topics:
        drafts += (llm(f"write about {t}"),)
    for i, d in enumerate(drafts):
        print(f"{i}: {len(d)}")
    return len(drafts)

@sequential
def print(line): ...

@unordered
async def llm(prompt): ...
