// Two simple themes (CSS custom-property sets).

export interface Theme {
    name: string;
    vars: Record<string, string>;
}

export const THEMES: Theme[] = [
    {
        name: "paper",
        vars: {
            "--bg": "#f7f6f2",
            "--fg": "#1c1c1c",
            "--panel": "#ffffff",
            "--accent": "#2f6f4f",
            "--badge-pending": "#c9a227",
            "--badge-done": "#2f6f4f",
            "--badge-failed": "#b3362b",
        },
    },
    {
        name: "slate",
        vars: {
            "--bg": "#14181d",
            "--fg": "#d7dde4",
            "--panel": "#1d242c",
            "--accent": "#5aa9e6",
            "--badge-pending": "#e0b84c",
            "--badge-done": "#63bd84",
            "--badge-failed": "#e06c5a",
        },
    },
];

export function applyTheme(root: HTMLElement, theme: Theme): void {
    for (const [key, value] of Object.entries(theme.vars)) {
        root.style.setProperty(key, value);
    }
    root.dataset.theme = theme.name;
}
