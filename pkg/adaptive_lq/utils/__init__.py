# Config documents and CSV emission
