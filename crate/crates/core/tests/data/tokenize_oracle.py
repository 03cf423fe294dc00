"""Reference tokenizer used to freeze paragraph.tokens.

Rules: lowercase; apostrophes removed; any other non-alphanumeric character
separates tokens; tokens shorter than 2 characters or in the stop list are
dropped. Usage: python3 tokenize_oracle.py paragraph.txt stopwords.txt
"""
import re
import sys

text = open(sys.argv[1], encoding="utf-8").read()
stops = {l.strip().lower() for l in open(sys.argv[2], encoding="utf-8") if l.strip()}
text = re.sub(r"['’]", "", text.lower())
tokens = [t for t in re.split(r"[^\w]|_", text) if len(t) >= 2 and t not in stops]
print("\n".join(tokens))
